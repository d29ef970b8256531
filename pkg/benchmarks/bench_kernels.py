#!/usr/bin/env python3
"""Benchmarks the compiled similarity kernels against the pure-Python lane.

Covers the two hot paths: trigram hash embedding and the all-pairs
cosine scan. Run after `pip install -e . --no-build-isolation`:

    python benchmarks/bench_kernels.py
"""
from __future__ import annotations

import random
import time

from backlog_groomer.embedding import normalize_for_hashing
from backlog_groomer.kernels import _purekernels

try:
    from backlog_groomer.kernels import _fastkernels
except ImportError:
    _fastkernels = None

WORDS = (
    "login checkout payment upload avatar timeout retry cache index export "
    "import report dashboard session token refund coupon inventory queue "
    "notification search filter sort page mobile crash driver database"
).split()


def make_texts(rng: random.Random, count: int, words: int) -> list[str]:
    return [
        normalize_for_hashing(" ".join(rng.choice(WORDS) for _ in range(words)))
        for _ in range(count)
    ]


def timeit(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def row(label: str, pure_seconds: float, fast_seconds: float | None) -> None:
    if fast_seconds is None:
        print(f"{label:<42} {pure_seconds * 1e3:>10.1f} ms {'-':>12} {'-':>8}")
    else:
        speedup = pure_seconds / fast_seconds
        print(
            f"{label:<42} {pure_seconds * 1e3:>10.1f} ms "
            f"{fast_seconds * 1e3:>9.1f} ms {speedup:>7.1f}x"
        )


def bench_hash_embed(rng: random.Random) -> None:
    texts = make_texts(rng, 500, 30)

    def run(lane):
        def body():
            for text in texts:
                lane.hash_embed(text, 256)

        return body

    pure = timeit(run(_purekernels))
    fast = timeit(run(_fastkernels)) if _fastkernels else None
    row("hash_embed: 500 texts x ~30 words, dim 256", pure, fast)


def bench_pairwise(rng: random.Random, n: int) -> None:
    texts = make_texts(rng, n, 20)
    vectors = [_purekernels.hash_embed(text, 256) for text in texts]

    pure = timeit(lambda: _purekernels.pairwise_scan(vectors, 0.5))
    fast = timeit(lambda: _fastkernels.pairwise_scan(vectors, 0.5)) if _fastkernels else None
    row(f"pairwise_scan: n={n}, dim 256", pure, fast)


def bench_score_many(rng: random.Random) -> None:
    texts = make_texts(rng, 2000, 20)
    vectors = [_purekernels.hash_embed(text, 256) for text in texts]
    query = vectors[0]

    pure = timeit(lambda: _purekernels.score_many(query, vectors))
    fast = timeit(lambda: _fastkernels.score_many(query, vectors)) if _fastkernels else None
    row("score_many: 1 query vs 2000 vectors", pure, fast)


def main() -> None:
    rng = random.Random(7)
    lane = "available" if _fastkernels else "NOT BUILT (pure lane only)"
    print(f"compiled kernels: {lane}\n")
    print(f"{'benchmark':<42} {'pure':>13} {'compiled':>12} {'speedup':>8}")
    print("-" * 80)
    bench_hash_embed(rng)
    bench_pairwise(rng, 100)
    bench_pairwise(rng, 200)
    bench_pairwise(rng, 500)
    bench_score_many(rng)

    if _fastkernels:
        # sanity: the lanes must agree bit for bit on a spot check
        texts = make_texts(rng, 50, 15)
        vectors = [_purekernels.hash_embed(t, 128) for t in texts]
        assert _fastkernels.pairwise_scan(vectors, 0.3) == _purekernels.pairwise_scan(
            vectors, 0.3
        )
        print("\nbit-exact parity spot check: OK")


if __name__ == "__main__":
    main()
