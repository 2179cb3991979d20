"""Candidate selection: execution- and BLEU-based MBR, likelihood
baselines, and the executability filter combinator."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from . import shell
from .bleu import char_bleu, token_bleu
from .core import Candidate, CandidateSet, ExecutionOutcome, candidate_loglik

METHODS = (
    "greedy-first",
    "random-sample",
    "ml",
    "mall",
    "mbr-exec",
    "mbr-exec-soft",
    "mbr-charbleu",
    "mbr-tokenbleu",
)

EXEC_METHODS = {"mbr-exec", "mbr-exec-soft"}

RISK_KINDS = ("exec-hard", "exec-soft", "bleu-char", "bleu-token")


@dataclass(frozen=True)
class RiskFunction:
    kind: str

    def __post_init__(self):
        if self.kind not in RISK_KINDS:
            raise ValueError(f"unknown risk kind: {self.kind!r}")

    @property
    def needs_execution(self) -> bool:
        return self.kind.startswith("exec-")


@dataclass(frozen=True)
class RiskMatrix:
    kind: RiskFunction
    values: tuple[tuple[float, ...], ...]

    @property
    def n(self) -> int:
        return len(self.values)

    def row_sum(self, i: int) -> float:
        return sum(self.values[i])


@dataclass(frozen=True)
class SelectionEntry:
    problem_id: str
    method: str
    filtered: bool
    candidate_id: str
    program_text: str
    sample_seed: int = 0
    sample_size: int = 0
    temperature: float = 0.0
    score: Optional[float] = None
    filter_fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "method": self.method,
            "filtered": self.filtered,
            "candidate_id": self.candidate_id,
            "program_text": self.program_text,
            "sample_seed": self.sample_seed,
            "sample_size": self.sample_size,
            "temperature": self.temperature,
            "score": self.score,
            "filter_fallback": self.filter_fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionEntry":
        return cls(
            problem_id=d["problem_id"],
            method=d["method"],
            filtered=d.get("filtered", False),
            candidate_id=d["candidate_id"],
            program_text=d["program_text"],
            sample_seed=d.get("sample_seed", 0),
            sample_size=d.get("sample_size", 0),
            temperature=d.get("temperature", 0.0),
            score=d.get("score"),
            filter_fallback=d.get("filter_fallback", False),
        )


OutcomeMatrix = Sequence[Sequence[ExecutionOutcome]]


def _pair_indicator(a: ExecutionOutcome, b: ExecutionOutcome) -> int:
    """0 iff both sides executed ok and produced identical canonical output."""
    if a.ok and b.ok and a.output_digest == b.output_digest:
        return 0
    return 1


def pairwise_loss_exec(outcomes: OutcomeMatrix, soft: bool = False) -> RiskMatrix:
    """Pairwise execution-result loss over a complete outcome matrix.

    The hard loss is the worst-case per-test disagreement; the soft loss is
    the disagreeing fraction of tests. A failed execution disagrees with
    everything, itself included.
    """
    n = len(outcomes)
    if n and any(len(row) != len(outcomes[0]) for row in outcomes):
        raise ValueError("ragged outcome matrix")
    n_tests = len(outcomes[0]) if n else 0
    if n and n_tests == 0:
        raise ValueError("outcome matrix has no test columns")
    values = []
    for i in range(n):
        row = []
        for j in range(n):
            per_test = [
                _pair_indicator(outcomes[i][t], outcomes[j][t])
                for t in range(n_tests)
            ]
            row.append(float(max(per_test)) if not soft else sum(per_test) / n_tests)
        values.append(tuple(row))
    kind = RiskFunction("exec-soft" if soft else "exec-hard")
    return RiskMatrix(kind=kind, values=tuple(values))


def _shell_or_whitespace_tokens(text: str) -> list[str]:
    try:
        return shell.tokenize_command(text)
    except shell.ShellParseError:
        return text.split()


def pairwise_loss_bleu(
    candidate_set: CandidateSet,
    level: str = "char",
    shell_tokens: bool = False,
) -> RiskMatrix:
    """Negated, symmetrized BLEU-4 between every pair of programs.

    BLEU is direction-dependent, so each entry averages both hypothesis /
    reference orderings. Token level splits on whitespace, or through the
    shell tokenizer for shell-style corpora.
    """
    if level not in ("char", "token"):
        raise ValueError(f"unknown BLEU level: {level!r}")
    programs = [c.program_text for c in candidate_set]
    if level == "token":
        tokenize = _shell_or_whitespace_tokens if shell_tokens else str.split
        seqs = [tokenize(p) for p in programs]
        score = token_bleu
    else:
        seqs = programs
        score = char_bleu
    n = len(programs)
    values = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            sym = (score(seqs[i], seqs[j]) + score(seqs[j], seqs[i])) / 2.0
            values[i][j] = values[j][i] = -sym
    kind = RiskFunction("bleu-char" if level == "char" else "bleu-token")
    return RiskMatrix(kind=kind, values=tuple(tuple(r) for r in values))


def _tiebreak_key(candidate_set: CandidateSet):
    """Ranking among risk ties: largest total log-likelihood wins; with no
    logprobs anywhere, the lowest candidate index wins."""
    if all(c.has_logprobs for c in candidate_set):
        return lambda i: (-candidate_loglik(candidate_set[i]), i)
    return lambda i: i


def mbr_select(candidate_set: CandidateSet, risk: RiskMatrix) -> Candidate:
    """Pick the candidate with minimal summed pairwise risk.

    The sum runs over every reference candidate, the self term included.
    Exact risk ties fall to the likelihood tiebreak.
    """
    if len(candidate_set) == 0:
        raise ValueError("cannot select from an empty candidate set")
    if risk.n != len(candidate_set):
        raise ValueError(
            f"risk matrix size {risk.n} != candidate count {len(candidate_set)}"
        )
    risks = [risk.row_sum(i) for i in range(risk.n)]
    best = min(risks)
    tied = [i for i, r in enumerate(risks) if r == best]
    winner = min(tied, key=_tiebreak_key(candidate_set))
    return candidate_set[winner]


def select_ml(candidate_set: CandidateSet) -> Candidate:
    """Largest total log-likelihood; index breaks exact ties."""
    return _select_by_loglik(candidate_set, mean=False, name="ml")


def select_mall(candidate_set: CandidateSet) -> Candidate:
    """Largest per-token mean log-likelihood; index breaks exact ties."""
    return _select_by_loglik(candidate_set, mean=True, name="mall")


def _select_by_loglik(candidate_set: CandidateSet, mean: bool, name: str) -> Candidate:
    if len(candidate_set) == 0:
        raise ValueError("cannot select from an empty candidate set")
    missing = [c.candidate_id for c in candidate_set if not c.has_logprobs]
    if missing:
        raise ValueError(
            f"{name} selection needs token logprobs; missing for {missing[:3]}"
        )
    scores = [
        candidate_loglik(c) / (len(c.tokens) if mean else 1) for c in candidate_set
    ]
    best = max(scores)
    winner = next(i for i, s in enumerate(scores) if s == best)
    return candidate_set[winner]


def filter_executable(
    candidate_set: CandidateSet, outcomes: OutcomeMatrix
) -> tuple[CandidateSet, list[int], bool]:
    """Keep candidates that executed ok on every input.

    Returns the filtered set, the retained indices, and a fallback flag:
    when nothing qualifies the original set is passed through untouched so
    downstream selection never sees an empty pool.
    """
    if len(outcomes) != len(candidate_set):
        raise ValueError("outcome matrix does not cover the candidate set")
    kept = [
        i for i, row in enumerate(outcomes) if all(o.ok for o in row)
    ]
    if not kept:
        return candidate_set, list(range(len(candidate_set))), True
    filtered = CandidateSet(
        problem_id=candidate_set.problem_id,
        candidates=tuple(candidate_set[i] for i in kept),
        sample_seed=candidate_set.sample_seed,
    )
    return filtered, kept, False


def select(
    candidate_set: CandidateSet,
    method: str,
    outcomes: Optional[OutcomeMatrix] = None,
    filtered: bool = False,
    seed: int = 0,
    shell_tokens: bool = False,
) -> SelectionEntry:
    """Apply one selection method, optionally behind the executability filter."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    needs_outcomes = method in EXEC_METHODS or filtered
    if needs_outcomes and outcomes is None:
        raise ValueError(f"method {method!r} (filtered={filtered}) needs execution outcomes")
    if len(candidate_set) == 0:
        raise ValueError("cannot select from an empty candidate set")

    working = candidate_set
    working_outcomes = outcomes
    fallback = False
    if filtered:
        working, kept, fallback = filter_executable(candidate_set, outcomes)
        working_outcomes = [outcomes[i] for i in kept]

    if method == "greedy-first":
        chosen = working[0]
    elif method == "random-sample":
        chosen = working[random.Random(seed).randrange(len(working))]
    elif method == "ml":
        chosen = select_ml(working)
    elif method == "mall":
        chosen = select_mall(working)
    elif method in EXEC_METHODS:
        risk = pairwise_loss_exec(working_outcomes, soft=method == "mbr-exec-soft")
        chosen = mbr_select(working, risk)
    else:
        level = "char" if method == "mbr-charbleu" else "token"
        risk = pairwise_loss_bleu(working, level=level, shell_tokens=shell_tokens)
        chosen = mbr_select(working, risk)

    return SelectionEntry(
        problem_id=candidate_set.problem_id,
        method=("executability-" + method) if filtered else method,
        filtered=filtered,
        candidate_id=chosen.candidate_id,
        program_text=chosen.program_text,
        sample_seed=candidate_set.sample_seed,
        sample_size=len(candidate_set),
        temperature=candidate_set[0].temperature,
        filter_fallback=fallback,
    )
