"""Independent brute-force oracles used to check the library's fast paths.

These deliberately avoid the library's own implementations: n-gram hits are
counted by list removal, subset expectations by exhaustive enumeration, and
selection by a literal scan.
"""

from __future__ import annotations

import itertools
import math


def reference_bleu(hypothesis, reference) -> float:
    """Smoothed sentence BLEU-4 computed by explicit n-gram list matching."""
    h, r = list(hypothesis), list(reference)
    if not h or not r:
        return 0.0
    precisions = []
    zeros = 0
    for n in (1, 2, 3, 4):
        h_grams = [tuple(h[i : i + n]) for i in range(max(len(h) - n + 1, 0))]
        r_grams = [tuple(r[i : i + n]) for i in range(max(len(r) - n + 1, 0))]
        total = len(h_grams) if h_grams else 1
        hits = 0
        remaining = list(r_grams)
        for gram in h_grams:
            if gram in remaining:
                remaining.remove(gram)
                hits += 1
        if hits:
            precisions.append(hits / total)
        else:
            zeros += 1
            precisions.append(1.0 / (2**zeros * total))
    geo_mean = math.exp(sum(math.log(p) for p in precisions) / 4)
    brevity = 1.0 if len(h) > len(r) else math.exp(1 - len(r) / len(h))
    return brevity * geo_mean


def brute_force_mbr(risk_rows, logliks):
    """Scan every candidate: minimal risk sum, largest log-likelihood tie-break."""
    n = len(risk_rows)
    sums = [sum(risk_rows[i]) for i in range(n)]
    best_indices = [i for i in range(n) if sums[i] == min(sums)]
    if logliks is None:
        return best_indices[0]
    best = best_indices[0]
    for i in best_indices[1:]:
        if logliks[i] > logliks[best]:
            best = i
    return best


def enumerate_pass_at_k(n: int, c: int, k: int) -> float:
    """Expected pass@k over explicit enumeration of all size-k subsets."""
    passing = set(range(c))
    subsets = list(itertools.combinations(range(n), k))
    hits = sum(1 for s in subsets if passing & set(s))
    return hits / len(subsets)
