"""Execution-aware selection of model-sampled programs."""

from .core import (
    Candidate,
    CandidateSet,
    ExecutionOutcome,
    Problem,
    TestInput,
    candidate_loglik,
    candidate_mean_loglik,
    canonical_digest,
)
from .selection import (
    RiskFunction,
    RiskMatrix,
    filter_executable,
    mbr_select,
    pairwise_loss_bleu,
    pairwise_loss_exec,
    select,
    select_mall,
    select_ml,
)

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CandidateSet",
    "ExecutionOutcome",
    "Problem",
    "TestInput",
    "candidate_loglik",
    "candidate_mean_loglik",
    "canonical_digest",
    "RiskFunction",
    "RiskMatrix",
    "filter_executable",
    "mbr_select",
    "pairwise_loss_bleu",
    "pairwise_loss_exec",
    "select",
    "select_mall",
    "select_ml",
]
