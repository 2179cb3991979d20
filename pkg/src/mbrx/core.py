"""Domain types shared across the pipeline, plus the canonical output
digest scheme that keys execution caching and equivalence checks."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Optional

DATASET_STYLES = ("mbpp-style", "spider-style", "nl2bash-style", "custom")


class CanonicalizationError(ValueError):
    """Raised when an execution output cannot be canonically serialized.

    This indicates a runner defect, not a candidate failure.
    """


class SchemaError(ValueError):
    """Raised on malformed or inconsistent on-disk records."""


@dataclass(frozen=True)
class TestInput:
    input_id: str
    payload: Any = None


@dataclass(frozen=True)
class Problem:
    problem_id: str
    dataset: str
    description: str
    info: Optional[str] = None
    test_inputs: tuple[TestInput, ...] = ()
    reference_outputs: Optional[tuple[Any, ...]] = None
    reference_program: Optional[str] = None
    db_context: Optional[str] = None

    def __post_init__(self):
        if not self.problem_id:
            raise SchemaError("problem_id must be non-empty")
        if self.dataset not in DATASET_STYLES:
            raise SchemaError(f"unknown dataset style: {self.dataset!r}")
        object.__setattr__(self, "test_inputs", tuple(self.test_inputs))
        if self.reference_outputs is not None:
            object.__setattr__(
                self, "reference_outputs", tuple(self.reference_outputs)
            )
            if len(self.reference_outputs) != len(self.test_inputs):
                raise SchemaError(
                    f"{self.problem_id}: reference_outputs length "
                    f"{len(self.reference_outputs)} != test_inputs length "
                    f"{len(self.test_inputs)}"
                )
        if self.dataset == "spider-style" and not self.db_context:
            raise SchemaError(f"{self.problem_id}: spider-style problems need db_context")
        seen = set()
        for ti in self.test_inputs:
            if ti.input_id in seen:
                raise SchemaError(f"{self.problem_id}: duplicate input_id {ti.input_id!r}")
            seen.add(ti.input_id)


@dataclass(frozen=True)
class Candidate:
    candidate_id: str
    problem_id: str
    program_text: str
    tokens: tuple[tuple[str, float], ...] = ()
    prompt_group_id: str = ""
    temperature: float = 0.0
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "tokens", tuple((t, float(lp)) for t, lp in self.tokens)
        )
        total = sum(lp for _, lp in self.tokens)
        if not math.isfinite(total):
            raise SchemaError(
                f"{self.candidate_id}: non-finite token logprob sum"
            )
        if not 0.0 <= self.temperature <= 2.0:
            raise SchemaError(f"{self.candidate_id}: temperature out of [0, 2]")

    @property
    def has_logprobs(self) -> bool:
        return len(self.tokens) > 0


@dataclass(frozen=True)
class ExecutionOutcome:
    candidate_id: str
    input_id: str
    status: str
    output: Any = None
    wall_time: float = 0.0
    output_digest: Optional[str] = None

    STATUSES = (
        "ok",
        "runtime_error",
        "parse_error",
        "timeout",
        "memory_exceeded",
        "runner_unavailable",
    )

    def __post_init__(self):
        if self.status not in self.STATUSES:
            raise SchemaError(f"unknown outcome status: {self.status!r}")
        if (self.status == "ok") != (self.output_digest is not None):
            raise SchemaError("output_digest present iff status is ok")

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class CandidateSet:
    problem_id: str
    candidates: tuple[Candidate, ...]
    sample_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        seen = set()
        for c in self.candidates:
            if c.problem_id != self.problem_id:
                raise SchemaError(
                    f"candidate {c.candidate_id} belongs to {c.problem_id}, "
                    f"not {self.problem_id}"
                )
            if c.candidate_id in seen:
                raise SchemaError(f"duplicate candidate_id {c.candidate_id!r}")
            seen.add(c.candidate_id)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self) -> Iterator[Candidate]:
        return iter(self.candidates)

    def __getitem__(self, i: int) -> Candidate:
        return self.candidates[i]


# ---------------------------------------------------------------------------
# Canonical serialization and digests


def canonical_text(value: Any) -> str:
    """Serialize an execution output to a canonical textual form.

    Floats use their shortest round-trip representation; tuples and lists
    collapse to the same form; dict entries are ordered by key; sets are
    sorted. Strings are quoted, so the string "3" never collides with the
    number 3.
    """
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        if value == int(value) and abs(value) < 1e16:
            # repr(3.0) == '3.0'; keep that distinct from int 3
            return repr(value)
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, bytes):
        return "bytes:" + value.hex()
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_text(v) for v in value) + "]"
    if isinstance(value, (set, frozenset)):
        return "set[" + ",".join(sorted(canonical_text(v) for v in value)) + "]"
    if isinstance(value, dict):
        items = sorted(
            (canonical_text(k), canonical_text(v)) for k, v in value.items()
        )
        return "{" + ",".join(f"{k}:{v}" for k, v in items) + "}"
    raise CanonicalizationError(
        f"non-serializable execution output of type {type(value).__name__}"
    )


def digest_of_canonical(text: str) -> str:
    """SHA-256 digest of an already-canonicalized textual form."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def rows_canonical_text(rows: Iterable, ordered: bool) -> str:
    """Canonical form of a query result: a row list, or a sorted multiset
    when the producing runner declares its output unordered."""
    items = [canonical_text(list(r)) for r in rows]
    if ordered:
        return "[" + ",".join(items) + "]"
    return "multiset[" + ",".join(sorted(items)) + "]"


def canonical_digest(value: Any, unordered: bool = False) -> str:
    """SHA-256 digest of the canonical form of ``value``.

    With ``unordered=True`` the value must be an iterable of rows and is
    digested as a multiset (sorted canonical rows), for runners that declare
    their output order-insensitive.
    """
    if unordered:
        if not isinstance(value, (list, tuple)):
            raise CanonicalizationError("unordered digest requires a row list")
        text = "multiset[" + ",".join(sorted(canonical_text(v) for v in value)) + "]"
    else:
        text = canonical_text(value)
    return digest_of_canonical(text)


# ---------------------------------------------------------------------------
# Likelihood scores


def candidate_loglik(c: Candidate) -> float:
    """Total log-likelihood (nats): the log of the token probability product."""
    if not c.tokens:
        raise ValueError(f"{c.candidate_id}: no token logprobs available")
    return sum(lp for _, lp in c.tokens)


def candidate_mean_loglik(c: Candidate) -> float:
    """Per-token mean log-likelihood (nats/token)."""
    if not c.tokens:
        raise ValueError(f"{c.candidate_id}: no token logprobs available")
    return candidate_loglik(c) / len(c.tokens)


# ---------------------------------------------------------------------------
# JSONL serialization


def problem_to_dict(p: Problem) -> dict:
    d = {
        "problem_id": p.problem_id,
        "dataset": p.dataset,
        "description": p.description,
        "info": p.info,
        "test_inputs": [{"input_id": t.input_id, "payload": t.payload} for t in p.test_inputs],
        "reference_outputs": list(p.reference_outputs) if p.reference_outputs is not None else None,
        "reference_program": p.reference_program,
        "db_context": p.db_context,
    }
    return d


def problem_from_dict(d: dict) -> Problem:
    return Problem(
        problem_id=d["problem_id"],
        dataset=d["dataset"],
        description=d["description"],
        info=d.get("info"),
        test_inputs=tuple(
            TestInput(t["input_id"], t.get("payload")) for t in d.get("test_inputs", [])
        ),
        reference_outputs=tuple(d["reference_outputs"]) if d.get("reference_outputs") is not None else None,
        reference_program=d.get("reference_program"),
        db_context=d.get("db_context"),
    )


def candidate_to_dict(c: Candidate) -> dict:
    return {
        "candidate_id": c.candidate_id,
        "problem_id": c.problem_id,
        "program_text": c.program_text,
        "tokens": [[t, lp] for t, lp in c.tokens],
        "prompt_group_id": c.prompt_group_id,
        "temperature": c.temperature,
        "truncated": c.truncated,
    }


def candidate_from_dict(d: dict) -> Candidate:
    return Candidate(
        candidate_id=d["candidate_id"],
        problem_id=d["problem_id"],
        program_text=d["program_text"],
        tokens=tuple((t[0], t[1]) for t in d.get("tokens", [])),
        prompt_group_id=d.get("prompt_group_id", ""),
        temperature=d.get("temperature", 0.0),
        truncated=d.get("truncated", False),
    )


def outcome_to_dict(o: ExecutionOutcome) -> dict:
    return {
        "candidate_id": o.candidate_id,
        "input_id": o.input_id,
        "status": o.status,
        "output": o.output,
        "wall_time": o.wall_time,
        "output_digest": o.output_digest,
    }


def outcome_from_dict(d: dict) -> ExecutionOutcome:
    return ExecutionOutcome(
        candidate_id=d["candidate_id"],
        input_id=d["input_id"],
        status=d["status"],
        output=d.get("output"),
        wall_time=d.get("wall_time", 0.0),
        output_digest=d.get("output_digest"),
    )


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) pairs; malformed lines raise SchemaError."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"{path}:{lineno}: malformed JSON ({e})") from e


def load_problems(path) -> dict[str, Problem]:
    problems: dict[str, Problem] = {}
    for lineno, rec in read_jsonl(path):
        try:
            p = problem_from_dict(rec)
        except (KeyError, SchemaError) as e:
            raise SchemaError(f"{path}:{lineno}: {e}") from e
        if p.problem_id in problems:
            raise SchemaError(f"{path}:{lineno}: duplicate problem_id {p.problem_id!r}")
        problems[p.problem_id] = p
    return problems


def save_problems(path, problems: Iterable[Problem]) -> None:
    write_jsonl(path, (problem_to_dict(p) for p in problems))


def save_candidates(path, candidates: Iterable[Candidate]) -> None:
    write_jsonl(path, (candidate_to_dict(c) for c in candidates))


def save_outcomes(path, outcomes: Iterable[ExecutionOutcome]) -> None:
    write_jsonl(path, (outcome_to_dict(o) for o in outcomes))


def load_outcomes(path) -> list[ExecutionOutcome]:
    out = []
    for lineno, rec in read_jsonl(path):
        try:
            out.append(outcome_from_dict(rec))
        except (KeyError, SchemaError) as e:
            raise SchemaError(f"{path}:{lineno}: {e}") from e
    return out
