"""In-memory vector store with exact cosine similarity queries.

Intentionally brute-force: backlogs are tens to hundreds of issues, so an
exact O(n^2) scan is instant and provably correct, and there is no
approximate structure to tune or distrust. Concurrency contract: many
readers or one writer; scans work on a consistent snapshot of the items.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from . import kernels
from .embedding import EmbeddingVector
from .errors import GroomerError
from .model import IssuePair


class DimensionMismatchError(GroomerError):
    pass


class ZeroVectorError(GroomerError):
    pass


class EmptyIndexError(GroomerError):
    pass


@dataclass(frozen=True)
class IndexedItem:
    key: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class ScoredNeighbor:
    key: str
    score: float


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity of two vectors; symmetric, in [-1, 1]."""
    if u.dim != v.dim:
        raise DimensionMismatchError(f"dims differ: {u.dim} vs {v.dim}")
    try:
        return kernels.cosine(u.values, v.values)
    except ValueError as exc:
        raise ZeroVectorError(str(exc)) from exc


class VectorIndex:
    """Exact cosine-similarity index over issue embeddings."""

    def __init__(self) -> None:
        self._items: dict[str, EmbeddingVector] = {}
        self._dim: int | None = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    @property
    def dimension(self) -> int | None:
        return self._dim

    def upsert(self, key: str, vector: EmbeddingVector) -> None:
        """Insert or replace the vector for a key.

        The first insert fixes the index dimension; later vectors must
        match it.
        """
        with self._lock:
            if self._dim is None:
                self._dim = vector.dim
            elif vector.dim != self._dim:
                raise DimensionMismatchError(
                    f"index dimension is {self._dim}, got {vector.dim} for {key!r}"
                )
            self._items[key] = vector

    def items(self) -> list[IndexedItem]:
        with self._lock:
            return [IndexedItem(key, vec) for key, vec in self._items.items()]

    def _snapshot(self) -> tuple[list[str], list[tuple[float, ...]]]:
        with self._lock:
            keys = list(self._items.keys())
            vectors = [self._items[key].values for key in keys]
        return keys, vectors

    def top_k(
        self, query: EmbeddingVector, k: int, exclude: str | None = None
    ) -> list[ScoredNeighbor]:
        """The k most cosine-similar items, best first, ties by key.

        `exclude` omits one key (typically the query issue itself).
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        keys, vectors = self._snapshot()
        if exclude is not None:
            kept = [(key, vec) for key, vec in zip(keys, vectors) if key != exclude]
            keys = [key for key, _ in kept]
            vectors = [vec for _, vec in kept]
        if not keys:
            raise EmptyIndexError("index has no items to query")
        if self._dim is not None and query.dim != self._dim:
            raise DimensionMismatchError(
                f"index dimension is {self._dim}, got query of {query.dim}"
            )
        try:
            scores = kernels.score_many(query.values, vectors)
        except ValueError as exc:
            raise ZeroVectorError(str(exc)) from exc
        neighbors = [ScoredNeighbor(key, score) for key, score in zip(keys, scores)]
        neighbors.sort(key=lambda n: (-n.score, n.key))
        return neighbors[:k]

    def pairwise_scan(self, threshold: float) -> list[tuple[IssuePair, float]]:
        """Every canonical key pair with cosine similarity >= threshold.

        The threshold is closed (>=, not >) so boundary scores are
        included. Results are sorted by score descending, then pair
        ascending, and each unordered pair appears exactly once.
        """
        if not 0.0 < threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {threshold}")
        keys, vectors = self._snapshot()
        if len(keys) < 2:
            raise EmptyIndexError("pairwise scan needs at least 2 items")
        try:
            raw_hits = kernels.pairwise_scan(vectors, threshold)
        except ValueError as exc:
            raise ZeroVectorError(str(exc)) from exc
        hits = [
            (IssuePair(keys[i], keys[j]), score) for i, j, score in raw_hits
        ]
        hits.sort(key=lambda hit: (-hit[1], hit[0]))
        return hits

    def dump(self, path: str | Path) -> None:
        """Debug dump: JSON object mapping each key to its vector values."""
        keys, vectors = self._snapshot()
        payload = {key: list(vec) for key, vec in zip(keys, vectors)}
        Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
