"""Pure-Python similarity kernels.

Fallback lane for environments without the compiled extension. Every
function keeps the exact accumulation order of the compiled lane
(`_fastkernels.pyx`), so the two are bit-for-bit interchangeable.
"""
from __future__ import annotations

import math
from typing import Sequence

_FNV_OFFSET = 14695981039346656037
_FNV_PRIME = 1099511628211
_U64_MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64_MASK
    return h


def hash_embed(normalized: str, dim: int) -> list[float]:
    """Trigram-bucket embedding of already-normalized text, L2-normalized.

    Every overlapping character trigram is FNV-1a-hashed over its UTF-8
    bytes and counted into ``hash % dim``; the count vector is then scaled
    to unit L2 norm. The input must be at least 3 characters long.
    """
    n = len(normalized)
    if n < 3:
        raise ValueError("need at least 3 characters to form a trigram")
    if dim <= 0:
        raise ValueError("dim must be positive")
    buckets = [0.0] * dim
    for i in range(n - 2):
        h = fnv1a64(normalized[i : i + 3].encode("utf-8"))
        buckets[h % dim] += 1.0
    sumsq = 0.0
    for value in buckets:
        sumsq += value * value
    norm = math.sqrt(sumsq)
    return [value / norm for value in buckets]


def dot(u: Sequence[float], v: Sequence[float]) -> float:
    """Dot product, accumulated in index order."""
    if len(u) != len(v):
        raise ValueError("length mismatch")
    acc = 0.0
    for a, b in zip(u, v):
        acc += a * b
    return acc


def _checked_norm(vec: Sequence[float], label: str) -> float:
    sumsq = dot(vec, vec)
    if sumsq == 0.0:
        raise ValueError(f"zero vector: {label}")
    return math.sqrt(sumsq)


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity dot(u,v) / (|u|*|v|)."""
    nu = _checked_norm(u, "left operand")
    nv = _checked_norm(v, "right operand")
    return dot(u, v) / (nu * nv)


def score_many(query: Sequence[float], vectors: Sequence[Sequence[float]]) -> list[float]:
    """Cosine similarity of a query against each vector, in input order."""
    nq = _checked_norm(query, "query")
    scores = []
    for idx, vec in enumerate(vectors):
        nv = _checked_norm(vec, f"index {idx}")
        scores.append(dot(query, vec) / (nq * nv))
    return scores


def pairwise_scan(
    vectors: Sequence[Sequence[float]], threshold: float
) -> list[tuple[int, int, float]]:
    """All index pairs (i < j) whose cosine similarity is >= threshold.

    Returned in double-loop order; callers impose their own sort.
    """
    n = len(vectors)
    norms = []
    for idx, vec in enumerate(vectors):
        norms.append(_checked_norm(vec, f"index {idx}"))
    hits: list[tuple[int, int, float]] = []
    for i in range(n - 1):
        vi = vectors[i]
        ni = norms[i]
        for j in range(i + 1, n):
            score = dot(vi, vectors[j]) / (ni * norms[j])
            if score >= threshold:
                hits.append((i, j, score))
    return hits
