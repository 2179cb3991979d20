from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mbrx.core import Candidate, CandidateSet, ExecutionOutcome
from mbrx.core import digest_of_canonical


def make_candidate(cid, problem_id="p", text="pass", logliks=None, **kwargs):
    tokens = tuple((f"t{i}", lp) for i, lp in enumerate(logliks)) if logliks else ()
    return Candidate(
        candidate_id=cid, problem_id=problem_id, program_text=text,
        tokens=tokens, **kwargs,
    )


def make_set(n, problem_id="p", logliks=None, texts=None):
    cands = []
    for i in range(n):
        lps = [logliks[i]] if logliks else None
        text = texts[i] if texts else f"program {i}"
        cands.append(make_candidate(f"c{i}", problem_id, text, lps))
    return CandidateSet(problem_id, tuple(cands))


def ok_outcome(cid, iid, canonical):
    return ExecutionOutcome(
        cid, iid, "ok", output=canonical,
        output_digest=digest_of_canonical(canonical),
    )


def fail_outcome(cid, iid, status="runtime_error"):
    return ExecutionOutcome(cid, iid, status)


def pytest_terminal_summary(terminalreporter):
    """Echo one verdict line per acceptance criterion after the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}")


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    from mbrx.toy import make_toy_dataset

    out = tmp_path_factory.mktemp("toy")
    problems_path, candidates_path = make_toy_dataset(out, n_problems=4, seed=7)
    return problems_path, candidates_path
