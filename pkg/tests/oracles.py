"""Independent reference implementations used only by tests.

Written from the documented behavior, on purpose in a different style
from the package (dict buckets, per-pair recomputation, no shared
helpers), so agreement between the two is meaningful evidence.
"""
from __future__ import annotations

import math


def ref_fnv1a64(data: bytes) -> int:
    value = 0xCBF29CE484222325  # same constants, hex spelling
    for byte in data:
        value ^= byte
        value = (value * 0x100000001B3) % 2**64
    return value


def ref_normalize(text: str) -> str:
    out = []
    previous_space = True
    for ch in text.lower():
        if ch.isalnum():
            out.append(ch)
            previous_space = False
        else:
            if not previous_space:
                out.append(" ")
            previous_space = True
    return "".join(out).rstrip()


def ref_local_hash(text: str, dim: int = 256) -> list[float]:
    """Trigram-hash embedding recomputed with dict buckets."""
    normalized = ref_normalize(text)
    if len(normalized) < 3:
        raise ValueError("degenerate")
    counts: dict[int, float] = {}
    for start in range(len(normalized) - 2):
        trigram = normalized[start : start + 3]
        bucket = ref_fnv1a64(trigram.encode("utf-8")) % dim
        counts[bucket] = counts.get(bucket, 0.0) + 1.0
    norm = math.sqrt(math.fsum(v * v for v in counts.values()))
    return [counts.get(i, 0.0) / norm for i in range(dim)]


def ref_cosine(u, v) -> float:
    dot = math.fsum(a * b for a, b in zip(u, v))
    nu = math.sqrt(math.fsum(a * a for a in u))
    nv = math.sqrt(math.fsum(b * b for b in v))
    return dot / (nu * nv)


def ref_pairwise(keys, vectors, threshold):
    """Brute-force double loop over every unordered pair."""
    hits = {}
    for i in range(len(keys)):
        for j in range(len(keys)):
            if j <= i:
                continue
            s = ref_cosine(vectors[i], vectors[j])
            if s >= threshold:
                a, b = sorted((keys[i], keys[j]))
                hits[(a, b)] = s
    return hits


def ref_top_k(query, keys, vectors, k, exclude=None):
    scored = []
    for key, vec in zip(keys, vectors):
        if key == exclude:
            continue
        scored.append((key, ref_cosine(query, vec)))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]
