"""Few-shot prompt assembly in the <info>/<text>/<code> markup format."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Optional

from .core import Problem

CODE_OPEN = "<code>"
CODE_CLOSE = "</code>"
DEFAULT_TRUNCATION_TOKENS = 1024


@dataclass(frozen=True)
class FewShotExample:
    text: str
    code: str
    info: Optional[str] = None

    def __post_init__(self):
        if not self.text or not self.code:
            raise ValueError("few-shot examples need non-empty text and code")


@dataclass(frozen=True)
class PromptGroup:
    group_id: str
    examples: tuple[FewShotExample, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if not 0 <= len(self.examples) <= 15:
            raise ValueError("prompt groups hold between 0 and 15 examples")


def render_prompt(group: PromptGroup, query: Problem) -> str:
    """Render a few-shot prompt ending in a bare opening ``<code>`` line.

    Each example emits an optional info line, a text line, and the code
    wrapped in tags with the closing tag abutting the final code character.
    The info line is omitted entirely when absent.
    """
    if not query.description:
        raise ValueError("query description must be non-empty")
    lines: list[str] = []
    for ex in group.examples:
        if ex.info is not None:
            lines.append(f"<info>{ex.info}</info>")
        lines.append(f"<text>{ex.text}</text>")
        lines.append(f"{CODE_OPEN}{ex.code}{CODE_CLOSE}")
    if query.info is not None:
        lines.append(f"<info>{query.info}</info>")
    lines.append(f"<text>{query.description}</text>")
    lines.append(CODE_OPEN)
    return "\n".join(lines) + "\n"


_TOKEN_RE = re.compile(r"\S+")


def strip_completion(
    raw: str,
    backend_token_count: Optional[int] = None,
    max_tokens: int = DEFAULT_TRUNCATION_TOKENS,
) -> tuple[str, bool]:
    """Cut a model continuation at the first closing ``</code>`` tag.

    Without a closing tag the text is truncated to ``max_tokens`` tokens:
    backend tokens when the caller supplies the backend's count, otherwise
    whitespace-delimited words.
    """
    idx = raw.find(CODE_CLOSE)
    if idx >= 0:
        return raw[:idx], False
    if backend_token_count is not None:
        # the sampling request already caps backend tokens at max_tokens
        return raw, True
    matches = list(_TOKEN_RE.finditer(raw))
    if len(matches) <= max_tokens:
        return raw, True
    return raw[: matches[max_tokens - 1].end()], True


def make_groups(
    pool: list[FewShotExample],
    k: int = 3,
    n_groups: int = 5,
    seed: int = 0,
    mode: str = "disjoint",
) -> list[PromptGroup]:
    """Build prompt groups from an example pool, deterministically per seed.

    ``disjoint`` partitions the pool into ``n_groups`` groups of ``k``
    distinct examples. ``concat`` returns a single group containing every
    pool example in a seed-determined order.
    """
    rng = random.Random(seed)
    if mode == "concat":
        order = list(range(len(pool)))
        rng.shuffle(order)
        return [
            PromptGroup(
                group_id="g0",
                examples=tuple(pool[i] for i in order),
                source=f"concat[{','.join(map(str, order))}]",
            )
        ]
    if mode != "disjoint":
        raise ValueError(f"unknown prompt mode: {mode!r}")
    if k * n_groups > len(pool):
        raise ValueError(
            f"pool of {len(pool)} cannot supply {n_groups} disjoint groups of {k}"
        )
    order = list(range(len(pool)))
    rng.shuffle(order)
    groups = []
    for g in range(n_groups):
        chosen = sorted(order[g * k : (g + 1) * k])
        groups.append(
            PromptGroup(
                group_id=f"g{g}",
                examples=tuple(pool[i] for i in chosen),
                source=f"pool[{','.join(map(str, chosen))}]",
            )
        )
    return groups
