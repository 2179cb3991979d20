"""Run candidate programs on test inputs under resource limits.

Three runners cover the dataset styles: a child-process Python interpreter
for assertion-style problems, an embedded SQLite engine for SQL problems,
and a parse-only shell tokenizer whose token stream stands in for an
execution result.
"""

from __future__ import annotations

import ast
import platform
import resource
import signal
import sqlite3
import subprocess
import sys
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import shell
from .cache import ExecutionCache, NullCache, cache_key
from .core import (
    Candidate,
    CandidateSet,
    ExecutionOutcome,
    TestInput,
    canonical_text,
    digest_of_canonical,
    rows_canonical_text,
)

RUNNER_KINDS = ("script-interpreter", "sql-engine", "shell-tokenizer")

OUTPUT_SENTINEL = "\n<<<MBRX-OUTPUT>>>\n"

DEFAULT_TIME_LIMIT = 10.0
DEFAULT_MEMORY_LIMIT = 1 << 30  # 1 GB desk default; configurable up to the paper's 128 GB


@dataclass(frozen=True)
class RunnerSpec:
    kind: str
    time_limit: float = DEFAULT_TIME_LIMIT
    memory_limit: int = DEFAULT_MEMORY_LIMIT
    interpreter_path: Optional[str] = None
    db_root: Optional[str] = None

    def __post_init__(self):
        if self.kind not in RUNNER_KINDS:
            raise ValueError(f"unknown runner kind: {self.kind!r}")
        if self.time_limit <= 0 or self.memory_limit <= 0:
            raise ValueError("time and memory limits must be positive")

    @property
    def version(self) -> str:
        if self.kind == "script-interpreter":
            return f"py-{platform.python_version()}"
        if self.kind == "sql-engine":
            return f"sqlite-{sqlite3.sqlite_version}"
        return shell.PARSER_VERSION


def extract_call_expression(payload: str) -> str:
    """Normalize a test payload to a bare call expression.

    Accepts either a call expression ("add(1, 2)") or a full assertion
    ("assert add(1, 2) == 3"), from which the asserted call is extracted.
    """
    tree = ast.parse(payload.strip(), mode="exec")
    if not tree.body:
        raise ValueError("empty test payload")
    node = tree.body[0]
    if isinstance(node, ast.Assert):
        test = node.test
        if isinstance(test, ast.Compare):
            return ast.unparse(test.left)
        return ast.unparse(test)
    if isinstance(node, ast.Expr):
        return ast.unparse(node.value)
    raise ValueError(f"test payload is not an expression: {payload!r}")


# ---------------------------------------------------------------------------
# Script interpreter runner

_HARNESS_TEMPLATE = """

import sys as _mbrx_sys
_mbrx_sys.path.insert(0, {pkg_path!r})
from mbrx.core import canonical_text as _mbrx_canon
_mbrx_value = eval(compile({expr!r}, "<test-input>", "eval"), globals())
_mbrx_sys.stdout.write({sentinel!r})
_mbrx_sys.stdout.write(_mbrx_canon(_mbrx_value))
_mbrx_sys.stdout.flush()
"""


def _limits_preexec(spec: RunnerSpec):
    def apply():
        resource.setrlimit(resource.RLIMIT_AS, (spec.memory_limit, spec.memory_limit))
        cpu = max(int(spec.time_limit) + 1, 1)
        resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))

    return apply


def _run_script(candidate: Candidate, test: TestInput, spec: RunnerSpec) -> ExecutionOutcome:
    try:
        expr = extract_call_expression(str(test.payload))
    except (SyntaxError, ValueError):
        return ExecutionOutcome(candidate.candidate_id, test.input_id, "runner_unavailable")
    pkg_path = str(Path(__file__).resolve().parent.parent)
    script = candidate.program_text + _HARNESS_TEMPLATE.format(
        pkg_path=pkg_path, expr=expr, sentinel=OUTPUT_SENTINEL
    )
    interpreter = spec.interpreter_path or sys.executable
    start = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="mbrx-run-") as scratch:
        script_path = Path(scratch) / "candidate.py"
        script_path.write_text(script, encoding="utf-8")
        try:
            proc = subprocess.run(
                [interpreter, str(script_path)],
                cwd=scratch,
                capture_output=True,
                text=True,
                timeout=spec.time_limit,
                preexec_fn=_limits_preexec(spec),
                env={"PATH": "/usr/bin:/bin"},
            )
        except subprocess.TimeoutExpired:
            return ExecutionOutcome(
                candidate.candidate_id, test.input_id, "timeout",
                wall_time=time.monotonic() - start,
            )
        except FileNotFoundError:
            return ExecutionOutcome(candidate.candidate_id, test.input_id, "runner_unavailable")
    wall = time.monotonic() - start
    if proc.returncode != 0:
        status = _classify_failure(proc)
        return ExecutionOutcome(candidate.candidate_id, test.input_id, status, wall_time=wall)
    _, sep, canonical = proc.stdout.rpartition(OUTPUT_SENTINEL)
    if not sep:
        # harness output missing despite clean exit
        return ExecutionOutcome(candidate.candidate_id, test.input_id, "runtime_error", wall_time=wall)
    return ExecutionOutcome(
        candidate.candidate_id,
        test.input_id,
        "ok",
        output=canonical,
        wall_time=wall,
        output_digest=digest_of_canonical(canonical),
    )


def _classify_failure(proc: subprocess.CompletedProcess) -> str:
    stderr = proc.stderr or ""
    if "MemoryError" in stderr or proc.returncode == -signal.SIGKILL:
        return "memory_exceeded"
    if proc.returncode == -signal.SIGXCPU or "CPU time limit" in stderr:
        return "timeout"
    if "SyntaxError" in stderr or "IndentationError" in stderr:
        return "parse_error"
    return "runtime_error"


# ---------------------------------------------------------------------------
# SQL runner


def _query_is_ordered(query: str) -> bool:
    """True when the top-level query carries an ORDER BY clause."""
    depth = 0
    upper = query.upper()
    i = 0
    while i < len(upper):
        ch = upper[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(depth - 1, 0)
        elif depth == 0 and upper.startswith("ORDER", i):
            tail = upper[i + 5 :].lstrip()
            if tail.startswith("BY"):
                return True
        i += 1
    return False


def _db_path(spec: RunnerSpec, db_context: Optional[str]) -> Optional[Path]:
    if not spec.db_root or not db_context:
        return None
    root = Path(spec.db_root)
    for suffix in (".sqlite", ".db"):
        path = root / f"{db_context}{suffix}"
        if path.exists():
            return path
    nested = root / db_context / f"{db_context}.sqlite"
    return nested if nested.exists() else None


def run_query(query: str, db_path: Path, time_limit: float) -> list[tuple]:
    """Execute a read-only query against a SQLite database file."""
    conn = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    timer = threading.Timer(time_limit, conn.interrupt)
    try:
        timer.start()
        rows = conn.execute(query).fetchall()
    finally:
        timer.cancel()
        conn.close()
    return rows


def _run_sql(candidate: Candidate, test: TestInput, spec: RunnerSpec, db_context: Optional[str]) -> ExecutionOutcome:
    db_path = _db_path(spec, db_context or (test.payload if isinstance(test.payload, str) else None))
    if db_path is None:
        return ExecutionOutcome(candidate.candidate_id, test.input_id, "runner_unavailable")
    start = time.monotonic()
    try:
        rows = run_query(candidate.program_text, db_path, spec.time_limit)
    except sqlite3.OperationalError as e:
        wall = time.monotonic() - start
        msg = str(e)
        if "interrupt" in msg.lower():
            return ExecutionOutcome(candidate.candidate_id, test.input_id, "timeout", wall_time=wall)
        if "syntax error" in msg.lower() or "unrecognized token" in msg.lower():
            return ExecutionOutcome(candidate.candidate_id, test.input_id, "parse_error", wall_time=wall)
        return ExecutionOutcome(candidate.candidate_id, test.input_id, "runtime_error", wall_time=wall)
    except sqlite3.DatabaseError:
        return ExecutionOutcome(
            candidate.candidate_id, test.input_id, "runtime_error",
            wall_time=time.monotonic() - start,
        )
    wall = time.monotonic() - start
    ordered = _query_is_ordered(candidate.program_text)
    canonical = rows_canonical_text(rows, ordered=ordered)
    return ExecutionOutcome(
        candidate.candidate_id,
        test.input_id,
        "ok",
        output=canonical,
        wall_time=wall,
        output_digest=digest_of_canonical(canonical),
    )


# ---------------------------------------------------------------------------
# Shell tokenizer runner (simulated execution)


def _run_shell(candidate: Candidate, test: TestInput) -> ExecutionOutcome:
    start = time.monotonic()
    try:
        tokens = shell.tokenize_command(candidate.program_text)
    except shell.ShellParseError:
        return ExecutionOutcome(
            candidate.candidate_id, test.input_id, "parse_error",
            wall_time=time.monotonic() - start,
        )
    wall = time.monotonic() - start
    canonical = canonical_text(tokens)
    return ExecutionOutcome(
        candidate.candidate_id,
        test.input_id,
        "ok",
        output=tokens,
        wall_time=wall,
        output_digest=digest_of_canonical(canonical),
    )


# ---------------------------------------------------------------------------
# Dispatch, caching, batch execution


def execute(
    candidate: Candidate,
    test: TestInput,
    spec: RunnerSpec,
    cache: Optional[ExecutionCache] = None,
    db_context: Optional[str] = None,
) -> ExecutionOutcome:
    """Run one candidate on one test input, via the cache when possible."""
    cache = cache if cache is not None else NullCache()
    payload = test.payload if spec.kind != "sql-engine" else [test.payload, db_context]
    key = cache_key(candidate.program_text, payload, spec.kind, spec.version)
    hit = cache.get(key)
    if hit is not None:
        # rebind identities: the cache is keyed by program text, not candidate id
        return ExecutionOutcome(
            candidate.candidate_id, test.input_id, hit.status,
            output=hit.output, wall_time=hit.wall_time, output_digest=hit.output_digest,
        )
    if spec.kind == "script-interpreter":
        outcome = _run_script(candidate, test, spec)
    elif spec.kind == "sql-engine":
        outcome = _run_sql(candidate, test, spec, db_context)
    else:
        outcome = _run_shell(candidate, test)
    cache.put(key, outcome)
    return outcome


def execute_set(
    candidate_set: CandidateSet,
    inputs: list[TestInput],
    spec: RunnerSpec,
    cache: Optional[ExecutionCache] = None,
    db_context: Optional[str] = None,
    jobs: int = 1,
) -> list[list[ExecutionOutcome]]:
    """Execute every candidate on every input; failures become outcomes.

    The returned matrix is indexed [candidate][input] and assembled by
    index regardless of worker completion order.
    """
    cells = [
        (ci, ti, cand, test)
        for ci, cand in enumerate(candidate_set)
        for ti, test in enumerate(inputs)
    ]

    def run_cell(cell):
        ci, ti, cand, test = cell
        try:
            return ci, ti, execute(cand, test, spec, cache, db_context)
        except Exception:
            return ci, ti, ExecutionOutcome(cand.candidate_id, test.input_id, "runner_unavailable")

    matrix: list[list[Optional[ExecutionOutcome]]] = [
        [None] * len(inputs) for _ in candidate_set
    ]
    if jobs <= 1 or len(cells) <= 1:
        results = map(run_cell, cells)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    for ci, ti, outcome in results:
        matrix[ci][ti] = outcome
    return matrix  # type: ignore[return-value]
