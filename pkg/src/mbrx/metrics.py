"""Ground-truth evaluation of selected programs and oracle upper bounds."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

from .bleu import char_bleu
from .cache import ExecutionCache
from .core import Candidate, Problem, canonical_digest
from .executor import RunnerSpec, _db_path, _query_is_ordered, execute, run_query


class EvaluationError(RuntimeError):
    """A dataset defect: the reference side of an evaluation failed."""


@dataclass(frozen=True)
class EvalResult:
    problem_id: str
    method: str
    passed: Optional[bool] = None
    score: Optional[float] = None
    n_tests_checked: int = 0

    def __post_init__(self):
        if (self.passed is None) == (self.score is None):
            raise ValueError("exactly one of passed/score must be set")

    @property
    def value(self) -> float:
        return self.score if self.score is not None else float(self.passed)


def eval_execution_accuracy(
    chosen: Candidate,
    problem: Problem,
    spec: RunnerSpec,
    cache: Optional[ExecutionCache] = None,
    method: str = "",
) -> EvalResult:
    """Pass/fail the chosen program against the problem's ground truth.

    Assertion-style problems must reproduce every reference output;
    SQL-style problems must return the same result as the reference query
    on the same database, order-insensitively unless the reference orders.
    """
    if problem.dataset == "spider-style":
        return _eval_spider(chosen, problem, spec, method)
    if problem.reference_outputs is None:
        raise EvaluationError(f"{problem.problem_id}: no reference outputs to evaluate against")
    passed = True
    for test, expected in zip(problem.test_inputs, problem.reference_outputs):
        outcome = execute(chosen, test, spec, cache)
        if not outcome.ok or outcome.output_digest != canonical_digest(expected):
            passed = False
            break
    return EvalResult(
        problem_id=problem.problem_id,
        method=method,
        passed=passed,
        n_tests_checked=len(problem.test_inputs),
    )


def _eval_spider(chosen: Candidate, problem: Problem, spec: RunnerSpec, method: str) -> EvalResult:
    if not problem.reference_program:
        raise EvaluationError(f"{problem.problem_id}: no reference program")
    db_path = _db_path(spec, problem.db_context)
    if db_path is None:
        raise EvaluationError(f"{problem.problem_id}: database {problem.db_context!r} not found")
    try:
        ref_rows = run_query(problem.reference_program, db_path, spec.time_limit)
    except Exception as e:
        raise EvaluationError(
            f"{problem.problem_id}: reference query failed: {e}"
        ) from e
    try:
        got_rows = run_query(chosen.program_text, db_path, spec.time_limit)
    except Exception:
        return EvalResult(problem.problem_id, method, passed=False, n_tests_checked=1)
    if _query_is_ordered(problem.reference_program):
        passed = list(ref_rows) == list(got_rows)
    else:
        passed = sorted(map(repr, ref_rows)) == sorted(map(repr, got_rows))
    return EvalResult(problem.problem_id, method, passed=passed, n_tests_checked=1)


def eval_char_bleu(chosen: Candidate, problem: Problem, method: str = "") -> EvalResult:
    """Character-level BLEU-4 of the chosen command against the reference."""
    if problem.reference_program is None:
        raise EvaluationError(f"{problem.problem_id}: no reference program")
    score = char_bleu(chosen.program_text, problem.reference_program)
    return EvalResult(problem.problem_id, method, score=score, n_tests_checked=0)


def evaluate(
    chosen: Candidate,
    problem: Problem,
    spec: RunnerSpec,
    cache: Optional[ExecutionCache] = None,
    method: str = "",
) -> EvalResult:
    """Dispatch to the dataset style's evaluation metric."""
    if problem.dataset == "nl2bash-style":
        return eval_char_bleu(chosen, problem, method=method)
    return eval_execution_accuracy(chosen, problem, spec, cache, method=method)


# ---------------------------------------------------------------------------
# Oracle upper bound


def pass_probability_at_k(n: int, c: int, k: int) -> float:
    """Probability that a uniform size-k subset of n candidates, c of them
    passing, contains at least one passing candidate: 1 - C(n-c,k)/C(n,k)."""
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for pool of {n}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    return 1.0 - math.comb(n - c, k) / math.comb(n, k)


def candidate_passes(
    candidate: Candidate,
    problem: Problem,
    spec: RunnerSpec,
    cache: Optional[ExecutionCache] = None,
) -> bool:
    """True when the candidate matches ground truth on every test input."""
    result = eval_execution_accuracy(candidate, problem, spec, cache)
    return bool(result.passed)


def expected_pass_at_k(
    pool: Sequence[Candidate],
    problem: Problem,
    spec: RunnerSpec,
    k: int,
    cache: Optional[ExecutionCache] = None,
) -> float:
    """Exact expected pass@k over uniform size-k subsets of the pool."""
    n = len(pool)
    if k > n:
        raise ValueError(f"k={k} exceeds pool size {n}")
    c = sum(candidate_passes(cand, problem, spec, cache) for cand in pool)
    return pass_probability_at_k(n, c, k)


# ---------------------------------------------------------------------------
# Aggregation


SUMMARY_COLUMNS = ("dataset", "method", "temperature", "sample_size", "seed_count", "mean", "std")


def aggregate(rows: list[dict]) -> list[dict]:
    """Summarize per-problem evaluation rows into per-configuration stats.

    Each input row carries dataset, method, temperature, sample_size, seed,
    problem_id and value. For every configuration the per-seed score is the
    mean over problems; the summary reports mean and sample standard
    deviation of those per-seed scores (0 when only one seed ran).
    """
    if not rows:
        return []
    grouped: dict[tuple, dict[int, list[float]]] = {}
    for row in rows:
        key = (row["dataset"], row["method"], row["temperature"], row["sample_size"])
        grouped.setdefault(key, {}).setdefault(row["seed"], []).append(row["value"])
    summary = []
    for key in sorted(grouped, key=lambda k: tuple(map(str, k))):
        per_seed = [
            statistics.fmean(values) for _, values in sorted(grouped[key].items())
        ]
        mean = statistics.fmean(per_seed)
        std = statistics.stdev(per_seed) if len(per_seed) > 1 else 0.0
        dataset, method, temperature, sample_size = key
        summary.append(
            {
                "dataset": dataset,
                "method": method,
                "temperature": temperature,
                "sample_size": sample_size,
                "seed_count": len(per_seed),
                "mean": mean,
                "std": std,
            }
        )
    return summary
