"""End-to-end experiment grids: bootstrap draws, cached execution,
per-method selection, evaluation, and summary CSVs with a resumable
manifest."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import yaml

from .cache import ExecutionCache, NullCache
from .core import Problem, load_problems
from .executor import RunnerSpec, execute_set
from .metrics import SUMMARY_COLUMNS, EvaluationError, aggregate, evaluate
from .sampler import bootstrap_draw, load_candidates
from .selection import METHODS, select

RUNNER_ALIASES = {"py": "script-interpreter", "sql": "sql-engine", "sh": "shell-tokenizer"}


def parse_method(name: str) -> tuple[str, bool]:
    """Split an optional executability- prefix off a method name."""
    if name.startswith("executability-"):
        base = name[len("executability-") :]
        filtered = True
    else:
        base, filtered = name, False
    if base not in METHODS:
        raise ValueError(f"unknown method {name!r}; valid: {', '.join(METHODS)}")
    return base, filtered


@dataclass
class ExperimentConfig:
    problems: str
    candidates: str
    output_dir: str
    methods: list[str] = field(default_factory=lambda: ["mbr-exec", "ml"])
    sample_sizes: list[int] = field(default_factory=lambda: [25])
    temperatures: list[float] = field(default_factory=list)
    tests_per_problem: list[int] = field(default_factory=lambda: [1])
    n_seeds: int = 5
    seed: int = 0
    runner: str = "py"
    time_limit: float = 10.0
    memory_limit: int = 1 << 30
    db_root: Optional[str] = None
    cache_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        for m in self.methods:
            parse_method(m)
        if self.runner not in RUNNER_ALIASES:
            raise ValueError(f"unknown runner {self.runner!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def runner_spec(self) -> RunnerSpec:
        return RunnerSpec(
            kind=RUNNER_ALIASES[self.runner],
            time_limit=self.time_limit,
            memory_limit=self.memory_limit,
            db_root=self.db_root,
        )


def _cell_key(temperature: float, size: int, tests: int) -> str:
    return f"temp{temperature}_size{size}_tests{tests}"


def _run_cell(
    cfg: ExperimentConfig,
    problems: dict[str, Problem],
    pools: dict[str, list],
    temperature: float,
    size: int,
    tests: int,
    spec: RunnerSpec,
    cache: ExecutionCache,
) -> list[dict]:
    rows = []
    for problem_id, pool in sorted(pools.items()):
        problem = problems[problem_id]
        usable = [c for c in pool if temperature < 0 or c.temperature == temperature]
        if len(usable) < size:
            continue
        draws = bootstrap_draw(usable, [size], cfg.n_seeds, cfg.seed)
        inputs = list(problem.test_inputs[:tests])
        for cset in draws:
            outcomes = execute_set(
                cset, inputs, spec, cache, db_context=problem.db_context, jobs=cfg.jobs
            )
            for method_name in cfg.methods:
                base, filtered = parse_method(method_name)
                entry = select(
                    cset,
                    base,
                    outcomes=outcomes,
                    filtered=filtered,
                    seed=cfg.seed + cset.sample_seed,
                    shell_tokens=problem.dataset == "nl2bash-style",
                )
                chosen = next(
                    c for c in cset if c.candidate_id == entry.candidate_id
                )
                result = evaluate(chosen, problem, spec, cache, method=method_name)
                rows.append(
                    {
                        "dataset": problem.dataset,
                        "method": method_name,
                        "temperature": temperature,
                        "sample_size": size,
                        "seed": cset.sample_seed,
                        "problem_id": problem_id,
                        "value": result.value,
                    }
                )
    return rows


def run_experiment(cfg: ExperimentConfig, resume: bool = False) -> dict:
    """Run the full grid and write one summary CSV per test-count setting.

    Each grid cell's per-problem rows are persisted, so an interrupted run
    resumes from the manifest without recomputing completed cells.
    """
    out = Path(cfg.output_dir)
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    problems = load_problems(cfg.problems)
    pools = {
        pid: [c for cset in sets for c in cset]
        for pid, sets in load_candidates(cfg.candidates).items()
    }
    missing = set(pools) - set(problems)
    if missing:
        raise ValueError(f"candidates reference unknown problems: {sorted(missing)[:3]}")
    spec = cfg.runner_spec()
    cache = ExecutionCache(cfg.cache_dir) if cfg.cache_dir else NullCache()

    manifest_path = out / "manifest.json"
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "runner_version": spec.version,
        "seed": cfg.seed,
        "cells": {},
    }
    if resume and manifest_path.exists():
        previous = json.loads(manifest_path.read_text())
        if previous.get("config_hash") == manifest["config_hash"]:
            manifest["cells"] = previous.get("cells", {})

    temperatures = cfg.temperatures or [-1.0]  # -1 keeps every sampled temperature
    for tests in cfg.tests_per_problem:
        for temperature in temperatures:
            for size in cfg.sample_sizes:
                key = _cell_key(temperature, size, tests)
                cell_file = cells_dir / f"{key}.jsonl"
                if manifest["cells"].get(key) == "complete" and cell_file.exists():
                    continue
                try:
                    rows = _run_cell(
                        cfg, problems, pools, temperature, size, tests, spec, cache
                    )
                except EvaluationError as e:
                    manifest["cells"][key] = f"failed: {e}"
                    continue
                with open(cell_file, "w", encoding="utf-8") as f:
                    for row in rows:
                        f.write(json.dumps(row, sort_keys=True) + "\n")
                manifest["cells"][key] = "complete"

    for tests in cfg.tests_per_problem:
        rows = []
        for temperature in temperatures:
            for size in cfg.sample_sizes:
                cell_file = cells_dir / f"{_cell_key(temperature, size, tests)}.jsonl"
                if cell_file.exists():
                    with open(cell_file, "r", encoding="utf-8") as f:
                        rows.extend(json.loads(line) for line in f if line.strip())
        write_summary_csv(out / f"summary_tests{tests}.csv", aggregate(rows))

    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def write_summary_csv(path: str | Path, summary: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in summary:
            out_row = dict(row)
            out_row["mean"] = f"{row['mean']:.10g}"
            out_row["std"] = f"{row['std']:.10g}"
            writer.writerow(out_row)
