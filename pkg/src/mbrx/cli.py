"""Command-line entry point: sample, exec, select, eval, oracle, run, toy."""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click

from . import core, metrics, sampler, selection, toy
from .cache import ExecutionCache, NullCache
from .executor import RunnerSpec, execute_set
from .experiment import (
    RUNNER_ALIASES,
    ExperimentConfig,
    parse_method,
    run_experiment,
    write_summary_csv,
)
from .prompt import FewShotExample, make_groups

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_ENV_ERROR = 2

USER_ERRORS = (core.SchemaError, ValueError, KeyError, FileNotFoundError)
ENV_ERRORS = (sampler.SamplingError, metrics.EvaluationError, OSError)


def _fail(code: int, message: str) -> None:
    click.echo(f"mbrx: {message}", err=True)
    sys.exit(code)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except USER_ERRORS as e:
        _fail(EXIT_USER_ERROR, str(e))
    except ENV_ERRORS as e:
        _fail(EXIT_ENV_ERROR, str(e))


def parse_memory(text: str) -> int:
    units = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30}
    text = text.strip().lower()
    if text and text[-1] in units:
        return int(float(text[:-1]) * units[text[-1]])
    return int(text)


def _runner_spec(runner: str, time_limit: float, mem_limit: str, db_root) -> RunnerSpec:
    if runner not in RUNNER_ALIASES:
        _fail(EXIT_USER_ERROR, f"unknown runner {runner!r}; valid: {', '.join(RUNNER_ALIASES)}")
    if runner == "sql" and not db_root:
        _fail(EXIT_ENV_ERROR, "sql runner needs --db-root")
    return RunnerSpec(
        kind=RUNNER_ALIASES[runner],
        time_limit=time_limit,
        memory_limit=parse_memory(mem_limit),
        db_root=db_root,
    )


@click.group()
@click.option("--cache", "cache_dir", type=click.Path(), default=None, help="Execution cache directory.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker pool width.")
@click.option("--log-level", default="warning", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def main(ctx, cache_dir, jobs, log_level, seed):
    """Select programs from sampled candidates by executing them and
    applying minimum-Bayes-risk and likelihood criteria."""
    if jobs < 1:
        _fail(EXIT_USER_ERROR, "--jobs must be >= 1")
    ctx.obj = {
        "cache": ExecutionCache(cache_dir) if cache_dir else NullCache(),
        "jobs": jobs,
        "seed": seed,
    }


@main.command("sample")
@click.option("--problems", required=True, type=click.Path(exists=True))
@click.option("--pool", required=True, type=click.Path(exists=True), help="Few-shot example pool (JSONL).")
@click.option("--out", required=True, type=click.Path())
@click.option("--endpoint", required=True, help="Completions endpoint URL.")
@click.option("--model", default="code-model", show_default=True)
@click.option("--temperature", type=float, default=0.3, show_default=True)
@click.option("--n", "n_per_group", type=int, default=5, show_default=True)
@click.option("--groups", "n_groups", type=int, default=5, show_default=True)
@click.option("--shots", type=int, default=3, show_default=True)
@click.option("--prompt-mode", type=click.Choice(["disjoint", "concat"]), default="disjoint", show_default=True)
@click.option("--api-key-env", default="MBRX_API_KEY", show_default=True)
@click.pass_obj
def sample_cmd(obj, problems, pool, out, endpoint, model, temperature,
               n_per_group, n_groups, shots, prompt_mode, api_key_env):
    """Sample candidate programs from a completion endpoint."""
    problem_map = _guard(core.load_problems, problems)
    examples = []
    for lineno, rec in core.read_jsonl(pool):
        try:
            examples.append(FewShotExample(text=rec["text"], code=rec["code"], info=rec.get("info")))
        except (KeyError, ValueError) as e:
            _fail(EXIT_USER_ERROR, f"{pool}:{lineno}: {e}")
    groups = _guard(
        make_groups, examples, k=shots, n_groups=n_groups, seed=obj["seed"], mode=prompt_mode
    )
    cfg = sampler.SamplingConfig(
        model_name=model,
        endpoint_url=endpoint,
        temperature=temperature,
        n_per_group=n_per_group,
        api_key_env=api_key_env,
    )
    all_candidates = []
    warned = False
    for problem in problem_map.values():
        result = _guard(sampler.sample_candidates, problem, groups, cfg)
        if result.partial:
            warned = True
            for gid, err in result.group_errors.items():
                click.echo(f"warning: {problem.problem_id} group {gid}: {err}", err=True)
        all_candidates.extend(result.candidate_set)
    core.save_candidates(out, all_candidates)
    click.echo(f"wrote {len(all_candidates)} candidates to {out}"
               + (" (partial)" if warned else ""))


@main.command("exec")
@click.option("--candidates", required=True, type=click.Path(exists=True))
@click.option("--problems", required=True, type=click.Path(exists=True))
@click.option("--runner", required=True, type=click.Choice(list(RUNNER_ALIASES)))
@click.option("--tests-per-problem", type=int, default=1, show_default=True)
@click.option("--time-limit", type=float, default=10.0, show_default=True)
@click.option("--mem-limit", default="1g", show_default=True)
@click.option("--db-root", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def exec_cmd(obj, candidates, problems, runner, tests_per_problem,
             time_limit, mem_limit, db_root, out):
    """Execute candidates on test inputs and record outcomes."""
    problem_map = _guard(core.load_problems, problems)
    sets = _guard(sampler.load_candidates, candidates)
    spec = _runner_spec(runner, time_limit, mem_limit, db_root)
    outcomes = []
    for problem_id, csets in sorted(sets.items()):
        problem = problem_map.get(problem_id)
        if problem is None:
            _fail(EXIT_USER_ERROR, f"candidates reference unknown problem {problem_id!r}")
        inputs = list(problem.test_inputs[:tests_per_problem])
        for cset in csets:
            matrix = execute_set(
                cset, inputs, spec, obj["cache"],
                db_context=problem.db_context, jobs=obj["jobs"],
            )
            for row in matrix:
                outcomes.extend(row)
    core.save_outcomes(out, outcomes)
    click.echo(f"wrote {len(outcomes)} outcomes to {out}")


def _matrix_from_outcomes(cset, outcome_list):
    by_key = {(o.candidate_id, o.input_id): o for o in outcome_list}
    input_ids = sorted({o.input_id for o in outcome_list if o.candidate_id == cset[0].candidate_id})
    matrix = []
    for cand in cset:
        row = []
        for iid in input_ids:
            o = by_key.get((cand.candidate_id, iid))
            if o is None:
                raise core.SchemaError(
                    f"missing outcome for {cand.candidate_id} on input {iid}"
                )
            row.append(o)
        matrix.append(row)
    return matrix


@main.command("select")
@click.option("--candidates", required=True, type=click.Path(exists=True))
@click.option("--outcomes", "outcomes_path", type=click.Path(exists=True), default=None)
@click.option("--problems", type=click.Path(exists=True), default=None,
              help="Needed to pick the token BLEU tokenizer per dataset style.")
@click.option("--method", required=True)
@click.option("--filter-executable", is_flag=True, default=False)
@click.option("--tests", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def select_cmd(obj, candidates, outcomes_path, problems, method,
               filter_executable, tests, out):
    """Select one candidate per problem with the requested method."""
    try:
        base, prefiltered = parse_method(method)
    except ValueError as e:
        _fail(EXIT_USER_ERROR, str(e))
    filtered = filter_executable or prefiltered
    sets = _guard(sampler.load_candidates, candidates)
    problem_map = _guard(core.load_problems, problems) if problems else {}
    outcome_map: dict[str, list] = {}
    if outcomes_path:
        all_outcomes = _guard(core.load_outcomes, outcomes_path)
        id_to_problem = {
            c.candidate_id: pid for pid, csets in sets.items() for cs in csets for c in cs
        }
        for o in all_outcomes:
            pid = id_to_problem.get(o.candidate_id)
            if pid is not None:
                outcome_map.setdefault(pid, []).append(o)
    entries = []
    for problem_id, csets in sorted(sets.items()):
        problem = problem_map.get(problem_id)
        shell_tokens = bool(problem and problem.dataset == "nl2bash-style")
        for cset in csets:
            matrix = None
            if problem_id in outcome_map:
                matrix = _guard(_matrix_from_outcomes, cset, outcome_map[problem_id])
                matrix = [row[:tests] for row in matrix]
            entry = _guard(
                selection.select, cset, base,
                outcomes=matrix, filtered=filtered,
                seed=obj["seed"], shell_tokens=shell_tokens,
            )
            entries.append(entry)
    core.write_jsonl(out, (e.to_dict() for e in entries))
    click.echo(f"wrote {len(entries)} selections to {out}")


@main.command("eval")
@click.option("--report", required=True, type=click.Path(exists=True))
@click.option("--candidates", type=click.Path(exists=True), default=None)
@click.option("--problems", required=True, type=click.Path(exists=True))
@click.option("--runner", required=True, type=click.Choice(list(RUNNER_ALIASES)))
@click.option("--time-limit", type=float, default=10.0, show_default=True)
@click.option("--mem-limit", default="1g", show_default=True)
@click.option("--db-root", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def eval_cmd(obj, report, candidates, problems, runner, time_limit, mem_limit, db_root, out):
    """Evaluate a selection report against ground truth."""
    problem_map = _guard(core.load_problems, problems)
    spec = _runner_spec(runner, time_limit, mem_limit, db_root)
    rows = []
    for lineno, rec in core.read_jsonl(report):
        try:
            entry = selection.SelectionEntry.from_dict(rec)
        except KeyError as e:
            _fail(EXIT_USER_ERROR, f"{report}:{lineno}: missing key {e}")
        problem = problem_map.get(entry.problem_id)
        if problem is None:
            _fail(EXIT_USER_ERROR, f"{report}:{lineno}: unknown problem {entry.problem_id!r}")
        chosen = core.Candidate(
            candidate_id=entry.candidate_id,
            problem_id=entry.problem_id,
            program_text=entry.program_text,
        )
        result = _guard(metrics.evaluate, chosen, problem, spec, obj["cache"], method=entry.method)
        rows.append(
            {
                "dataset": problem.dataset,
                "method": entry.method,
                "temperature": entry.temperature,
                "sample_size": entry.sample_size,
                "seed": entry.sample_seed,
                "problem_id": entry.problem_id,
                "value": result.value,
            }
        )
    write_summary_csv(out, metrics.aggregate(rows))
    click.echo(f"wrote summary to {out}")


@main.command("oracle")
@click.option("--candidates", required=True, type=click.Path(exists=True))
@click.option("--problems", required=True, type=click.Path(exists=True))
@click.option("--k", "k_values", default="1,5,25", show_default=True,
              help="Comma-separated subset sizes.")
@click.option("--runner", default="py", show_default=True, type=click.Choice(list(RUNNER_ALIASES)))
@click.option("--time-limit", type=float, default=10.0, show_default=True)
@click.option("--mem-limit", default="1g", show_default=True)
@click.option("--db-root", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def oracle_cmd(obj, candidates, problems, k_values, runner, time_limit, mem_limit, db_root, out):
    """Expected pass@k upper bounds over the candidate pools."""
    try:
        ks = sorted({int(k) for k in k_values.split(",") if k.strip()})
    except ValueError:
        _fail(EXIT_USER_ERROR, f"bad --k list: {k_values!r}")
    problem_map = _guard(core.load_problems, problems)
    sets = _guard(sampler.load_candidates, candidates)
    spec = _runner_spec(runner, time_limit, mem_limit, db_root)
    per_k: dict[int, list[float]] = {k: [] for k in ks}
    out_rows = []
    for problem_id, csets in sorted(sets.items()):
        problem = problem_map.get(problem_id)
        if problem is None:
            _fail(EXIT_USER_ERROR, f"candidates reference unknown problem {problem_id!r}")
        pool = [c for cs in csets for c in cs]
        for k in ks:
            if k > len(pool):
                continue
            value = _guard(metrics.expected_pass_at_k, pool, problem, spec, k, obj["cache"])
            per_k[k].append(value)
            out_rows.append({"problem_id": problem_id, "k": k, "expected_pass": f"{value:.10g}"})
    with open(out, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["problem_id", "k", "expected_pass"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(out_rows)
    for k in ks:
        if per_k[k]:
            mean = sum(per_k[k]) / len(per_k[k])
            click.echo(f"ExPass@{k}: {mean:.4f} over {len(per_k[k])} problems")


@main.command("run")
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--resume", is_flag=True, default=False)
def run_cmd(config, resume):
    """Run a full experiment grid from a config file."""
    cfg = _guard(ExperimentConfig.from_file, config)
    manifest = _guard(run_experiment, cfg, resume=resume)
    incomplete = [k for k, v in manifest["cells"].items() if v != "complete"]
    click.echo(f"completed {len(manifest['cells']) - len(incomplete)}/{len(manifest['cells'])} cells")
    if incomplete:
        click.echo("incomplete cells: " + ", ".join(incomplete), err=True)


@main.command("toy")
@click.option("--out", required=True, type=click.Path())
@click.option("--problems", "n_problems", type=int, default=20, show_default=True)
@click.option("--candidates", "n_candidates", type=int, default=10, show_default=True)
@click.pass_obj
def toy_cmd(obj, out, n_problems, n_candidates):
    """Generate the offline toy corpus for desk-scale runs."""
    p, c = toy.make_toy_dataset(out, n_problems=n_problems,
                                n_candidates=n_candidates, seed=obj["seed"])
    click.echo(f"wrote {p} and {c}")


if __name__ == "__main__":
    main()
