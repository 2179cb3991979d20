"""Deterministic toy corpus: assertion-style problems with locally
mutated candidate programs, for offline end-to-end runs without a model
endpoint."""

from __future__ import annotations

import random
import re
from pathlib import Path

from .core import Candidate, Problem, TestInput, save_candidates, save_problems

_TOKEN_SPLIT = re.compile(r"\S+\s*|\s+")


def _fake_tokens(program_text: str, total_loglik: float) -> tuple[tuple[str, float], ...]:
    chunks = _TOKEN_SPLIT.findall(program_text)
    if not chunks:
        chunks = [program_text or " "]
    per = total_loglik / len(chunks)
    return tuple((chunk, per) for chunk in chunks)


def _variants(name: str, a: int, b: int) -> list[tuple[str, str]]:
    """(label, program) candidate variants for f(x) = a*x + b."""
    wrong_b = b + 3
    return [
        ("correct-plain", f"def {name}(x):\n    return x * {a} + {b}"),
        ("correct-swapped", f"def {name}(x):\n    return {b} + {a} * x"),
        ("correct-temp", f"def {name}(x):\n    y = x * {a}\n    return y + {b}"),
        ("correct-loop", f"def {name}(x):\n    total = {b}\n    for _ in range({a}):\n        total += x\n    return total"),
        ("correct-lambda", f"{name} = lambda x: x * {a} + {b}"),
        ("wrong-offset-1", f"def {name}(x):\n    return x * {a} + {wrong_b}"),
        ("wrong-offset-2", f"def {name}(x):\n    return {wrong_b} + x * {a}"),
        ("wrong-offset-3", f"def {name}(x):\n    value = x * {a}\n    return value + {wrong_b}"),
        ("crash-div", f"def {name}(x):\n    return x * {a} + {b} + 1 // 0"),
        ("syntax-broken", f"def {name}(x)\n    return x * {a} + {b}"),
    ]


def make_toy_dataset(
    out_dir: str | Path,
    n_problems: int = 20,
    n_candidates: int = 10,
    seed: int = 0,
) -> tuple[Path, Path]:
    """Write problems.jsonl and candidates.jsonl under ``out_dir``.

    Each problem is a linear function to implement; candidates are scripted
    mutations of the reference, including a smaller cluster of agreeing
    wrong answers that often outscores the correct cluster on likelihood.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    problems: list[Problem] = []
    candidates: list[Candidate] = []
    for p in range(n_problems):
        name = f"combine_{p}"
        a = rng.randrange(2, 9)
        b = rng.randrange(1, 20)
        args = rng.sample(range(1, 30), 3)
        problems.append(
            Problem(
                problem_id=f"toy-{p:03d}",
                dataset="mbpp-style",
                description=(
                    f"Write a function {name} that multiplies its argument "
                    f"by {a} and adds {b}."
                ),
                info=f"assert {name}({args[0]}) == {a * args[0] + b}",
                test_inputs=tuple(
                    TestInput(f"t{i}", f"{name}({arg})") for i, arg in enumerate(args)
                ),
                reference_outputs=tuple(a * arg + b for arg in args),
                reference_program=f"def {name}(x):\n    return x * {a} + {b}",
            )
        )
        # on odd problems the agreeing-wrong cluster gets the best likelihoods
        ml_fooled = p % 2 == 1
        for ci, (label, text) in enumerate(_variants(name, a, b)[:n_candidates]):
            base = -1.5 - rng.random()
            if label.startswith("wrong") and ml_fooled:
                base = -0.2 - 0.1 * rng.random()
            elif label.startswith("correct") and not ml_fooled and ci == 0:
                base = -0.3
            candidates.append(
                Candidate(
                    candidate_id=f"toy-{p:03d}/c{ci:02d}",
                    problem_id=f"toy-{p:03d}",
                    program_text=text,
                    tokens=_fake_tokens(text, base * (1 + len(text) / 40)),
                    prompt_group_id=f"g{ci % 5}",
                    temperature=0.3,
                )
            )
    problems_path = out_dir / "problems.jsonl"
    candidates_path = out_dir / "candidates.jsonl"
    save_problems(problems_path, problems)
    save_candidates(candidates_path, candidates)
    return problems_path, candidates_path
