"""Deterministic text and vector similarity primitives.

All functions are pure and stateless. Text inputs are expected to be
normalized (see normalize); nothing here re-normalizes.
"""

from __future__ import annotations

import math
from typing import Sequence

__all__ = [
    "Embedding",
    "normalize",
    "fuzz_ratio",
    "token_best_ratio",
    "cosine_similarity",
]

Embedding = Sequence[float]


def normalize(raw: str) -> str:
    """Lowercase, collapse whitespace runs to single spaces, trim."""
    return " ".join(raw.split()).lower()


def _weighted_distance(a: str, b: str) -> int:
    # edit distance with insert/delete cost 1 and substitution cost 2
    if a == b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        append = cur.append
        for j, cb in enumerate(b, 1):
            if ca == cb:
                append(prev[j - 1])
            else:
                best = prev[j - 1] + 2
                up = prev[j] + 1
                if up < best:
                    best = up
                left = cur[j - 1] + 1
                if left < best:
                    best = left
                append(best)
        prev = cur
    return prev[-1]


def fuzz_ratio(a: str, b: str) -> float:
    """Length-normalized edit similarity in [0, 1].

    ratio = (|a| + |b| - D) / (|a| + |b|) where D is the weighted edit
    distance (indel 1, substitution 2). Two empty strings are identical: 1.0.
    """
    lensum = len(a) + len(b)
    if lensum == 0:
        return 1.0
    return (lensum - _weighted_distance(a, b)) / lensum


def token_best_ratio(a: str, b: str) -> float:
    """Best fuzz_ratio of a against any whitespace token of b.

    Falls back to the whole-string ratio when b has no tokens.
    """
    tokens = b.split()
    if not tokens:
        return fuzz_ratio(a, b)
    return max(fuzz_ratio(a, tok) for tok in tokens)


def cosine_similarity(u: Embedding, v: Embedding) -> float:
    """dot(u,v) / (|u|*|v|); 0.0 when either norm is zero.

    Raises ValueError on dimension mismatch, naming both dimensions.
    """
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    dot = 0.0
    sq_u = 0.0
    sq_v = 0.0
    for x, y in zip(u, v):
        dot += x * y
        sq_u += x * x
        sq_v += y * y
    if sq_u == 0.0 or sq_v == 0.0:
        return 0.0
    value = dot / math.sqrt(sq_u * sq_v)
    # guard against losing the [-1, 1] bound to rounding
    if value > 1.0:
        return 1.0
    if value < -1.0:
        return -1.0
    return value
