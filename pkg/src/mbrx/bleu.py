"""Smoothed sentence-level BLEU-4 over character or token sequences."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

MAX_ORDER = 4


def _ngram_counts(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def sentence_bleu(hypothesis: Sequence, reference: Sequence) -> float:
    """BLEU-4 of a single hypothesis against a single reference.

    Zero n-gram precisions are smoothed exponentially: the k-th zero-hit
    order contributes 1 / (2^k * total_ngrams), with empty n-gram counts
    treated as a single slot. Empty hypotheses or references score 0.
    """
    if len(hypothesis) == 0 or len(reference) == 0:
        return 0.0
    log_precisions = 0.0
    zero_hits = 0
    for n in range(1, MAX_ORDER + 1):
        total = max(len(hypothesis) - n + 1, 1)
        hits = 0
        if len(hypothesis) >= n:
            ref_counts = _ngram_counts(reference, n)
            for gram, count in _ngram_counts(hypothesis, n).items():
                hits += min(count, ref_counts.get(gram, 0))
        if hits > 0:
            p_n = hits / total
        else:
            zero_hits += 1
            p_n = 1.0 / (2**zero_hits * total)
        log_precisions += math.log(p_n)
    if len(hypothesis) > len(reference):
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - len(reference) / len(hypothesis))
    return brevity * math.exp(log_precisions / MAX_ORDER)


def char_bleu(hypothesis: str, reference: str) -> float:
    """Character-level BLEU-4 of two strings."""
    return sentence_bleu(list(hypothesis), list(reference))


def token_bleu(hypothesis: Sequence[str], reference: Sequence[str]) -> float:
    """Token-level BLEU-4 of two token sequences."""
    return sentence_bleu(list(hypothesis), list(reference))
