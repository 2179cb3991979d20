"""Candidate acquisition: HTTP completion sampling, offline replay of
collected sample files, and seeded bootstrap draws from a pool."""

from __future__ import annotations

import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import httpx

from .core import Candidate, CandidateSet, Problem, SchemaError, candidate_from_dict, read_jsonl
from .prompt import PromptGroup, render_prompt, strip_completion


@dataclass(frozen=True)
class SamplingConfig:
    model_name: str
    endpoint_url: Optional[str] = None
    temperature: float = 0.3
    n_per_group: int = 1
    max_tokens: int = 1024
    stop_sequence: str = "</code>"
    request_timeout: float = 60.0
    retry_limit: int = 3
    api_key_env: str = "MBRX_API_KEY"
    requests_per_minute: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.n_per_group < 1:
            raise ValueError("n_per_group must be >= 1")

    @property
    def effective_n(self) -> int:
        # greedy decoding is deterministic: one completion per group
        return 1 if self.temperature == 0.0 else self.n_per_group


class RateLimiter:
    """Token-bucket pacing for outbound completion requests."""

    def __init__(self, requests_per_minute: Optional[float]):
        self._interval = 60.0 / requests_per_minute if requests_per_minute else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = max(self._next_at - now, 0.0)
            self._next_at = max(self._next_at, now) + self._interval
        if delay:
            time.sleep(delay)


class SamplingError(RuntimeError):
    pass


@dataclass
class SampleResult:
    candidate_set: CandidateSet
    group_errors: dict[str, str] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.group_errors)


def _request_completions(
    client: httpx.Client,
    cfg: SamplingConfig,
    prompt: str,
    limiter: RateLimiter,
) -> list[dict]:
    if not cfg.endpoint_url:
        raise SamplingError("no endpoint_url configured")
    headers = {}
    api_key = os.environ.get(cfg.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": cfg.model_name,
        "prompt": prompt,
        "temperature": cfg.temperature,
        "n": cfg.effective_n,
        "max_tokens": cfg.max_tokens,
        "stop": [cfg.stop_sequence],
        "logprobs": 1,
    }
    last_error: Exception | None = None
    for attempt in range(cfg.retry_limit + 1):
        limiter.wait()
        try:
            resp = client.post(
                cfg.endpoint_url, json=body, headers=headers, timeout=cfg.request_timeout
            )
            resp.raise_for_status()
            return resp.json()["choices"]
        except (httpx.HTTPError, KeyError, ValueError) as e:
            last_error = e
            if attempt < cfg.retry_limit:
                time.sleep(min(2.0**attempt, 8.0) * 0.01)
    raise SamplingError(f"completion request to {cfg.endpoint_url} failed: {last_error}")


def _choice_to_candidate(
    choice: dict, problem: Problem, group: PromptGroup, index: int, cfg: SamplingConfig
) -> Candidate:
    raw = choice.get("text", "")
    logprobs = choice.get("logprobs") or {}
    token_texts = logprobs.get("tokens") or []
    token_lps = logprobs.get("token_logprobs") or []
    backend_count = len(token_texts) if token_texts else None
    text, truncated = strip_completion(raw, backend_token_count=backend_count,
                                       max_tokens=cfg.max_tokens)
    if choice.get("finish_reason") == "length":
        truncated = True
    tokens = tuple(
        (t, lp) for t, lp in zip(token_texts, token_lps) if lp is not None
    )
    return Candidate(
        candidate_id=f"{problem.problem_id}/{group.group_id}/s{index}",
        problem_id=problem.problem_id,
        program_text=text,
        tokens=tokens,
        prompt_group_id=group.group_id,
        temperature=cfg.temperature,
        truncated=truncated,
    )


def sample_candidates(
    problem: Problem,
    groups: list[PromptGroup],
    cfg: SamplingConfig,
    client: Optional[httpx.Client] = None,
) -> SampleResult:
    """Sample completions for one problem across all prompt groups.

    Candidates are ordered by (group index, completion index). A group
    whose requests exhaust their retries is recorded as an error and the
    remaining groups still contribute, yielding a partial set.
    """
    if not groups:
        raise ValueError("at least one prompt group is required")
    limiter = RateLimiter(cfg.requests_per_minute)
    owns_client = client is None
    client = client or httpx.Client()
    candidates: list[Candidate] = []
    errors: dict[str, str] = {}
    try:
        for group in groups:
            prompt = render_prompt(group, problem)
            try:
                choices = _request_completions(client, cfg, prompt, limiter)
            except SamplingError as e:
                errors[group.group_id] = str(e)
                continue
            for i, choice in enumerate(choices[: cfg.effective_n]):
                candidates.append(_choice_to_candidate(choice, problem, group, i, cfg))
    finally:
        if owns_client:
            client.close()
    if not candidates and errors:
        raise SamplingError(
            f"all prompt groups failed for {problem.problem_id}: "
            + "; ".join(errors.values())
        )
    return SampleResult(
        candidate_set=CandidateSet(problem.problem_id, tuple(candidates)),
        group_errors=errors,
    )


def load_candidates(path) -> dict[str, list[CandidateSet]]:
    """Group a candidate JSONL file into sets by (problem_id, sample_seed)."""
    buckets: dict[tuple[str, int], list[Candidate]] = {}
    for lineno, rec in read_jsonl(path):
        try:
            cand = candidate_from_dict(rec)
        except (KeyError, SchemaError, TypeError) as e:
            raise SchemaError(f"{path}:{lineno}: {e}") from e
        key = (cand.problem_id, int(rec.get("sample_seed", 0)))
        buckets.setdefault(key, []).append(cand)
    result: dict[str, list[CandidateSet]] = {}
    for (problem_id, seed), cands in buckets.items():
        cset = CandidateSet(problem_id, tuple(cands), sample_seed=seed)
        result.setdefault(problem_id, []).append(cset)
    for sets in result.values():
        sets.sort(key=lambda s: s.sample_seed)
    return result


def bootstrap_draw(
    pool: list[Candidate],
    sizes: list[int],
    n_seeds: int,
    seed: int,
) -> list[CandidateSet]:
    """Draw size-s subsets without replacement, n_seeds draws per size.

    Draws are deterministic under (seed, size, draw index) and preserve
    the pool's candidate ordering within each subset.
    """
    if not pool:
        raise ValueError("empty candidate pool")
    if max(sizes) > len(pool):
        raise ValueError(f"requested size {max(sizes)} exceeds pool of {len(pool)}")
    problem_id = pool[0].problem_id
    sets = []
    for size in sizes:
        for draw in range(n_seeds):
            rng = random.Random(f"{seed}:{size}:{draw}")
            indices = sorted(rng.sample(range(len(pool)), size))
            sets.append(
                CandidateSet(
                    problem_id,
                    tuple(pool[i] for i in indices),
                    sample_seed=draw,
                )
            )
    return sets
