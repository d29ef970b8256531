"""Text-to-vector providers with a content-addressed cache.

Two providers ship: a deterministic local trigram-hash embedder (the
offline default, bit-exact across runs and platforms) and a remote HTTP
provider for hosted embedding models. Results are cached by a 64-bit
content hash so re-scanning a backlog never re-bills an API.
"""
from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import isfinite
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from . import kernels
from .errors import ConfigError, GroomerError, ProviderError
from .model import BacklogSnapshot, issue_text

LOCALHASH = "localhash"
REMOTE = "remote"

DEFAULT_DIM = 256


class EmbeddingError(GroomerError):
    pass


class EmptyTextError(EmbeddingError):
    """Input text is empty after whitespace trimming."""


class DegenerateTextError(EmbeddingError):
    """Normalized text is too short to form a single trigram."""


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension real vector representing a piece of text."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.values, tuple):
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("embedding vector must be non-empty")
        for v in self.values:
            if not isfinite(v):
                raise ValueError("embedding vector contains a non-finite value")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EmbeddingConfig:
    """Provider selection plus batching/limits for embedding calls."""

    provider: str = LOCALHASH
    model_name: str = "local-trigram-v1"
    dim: int = DEFAULT_DIM
    max_batch: int = 32
    request_timeout: float = 30.0
    max_parallel_requests: int = 4
    cache_path: str | Path | None = None
    api_url: str | None = None
    api_key: str | None = None

    def __post_init__(self) -> None:
        if self.provider not in (LOCALHASH, REMOTE):
            raise ConfigError(f"unknown embedding provider: {self.provider!r}")
        if self.dim <= 0:
            raise ConfigError("embedding dim must be positive")
        if self.max_batch < 1:
            raise ConfigError("max_batch must be >= 1")
        if self.max_parallel_requests < 1:
            raise ConfigError("max_parallel_requests must be >= 1")


def normalize_for_hashing(text: str) -> str:
    """Lowercase, map non-alphanumerics to spaces, collapse runs, trim."""
    lowered = text.lower()
    replaced = "".join(ch if ch.isalnum() else " " for ch in lowered)
    return " ".join(replaced.split())


def local_hash_embed(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    """Deterministic trigram-hash embedding of raw text.

    Normalizes the text, buckets the FNV-1a hash of every overlapping
    character trigram mod `dim`, and L2-normalizes the counts. Output
    depends only on (text, dim).
    """
    if not text.strip():
        raise EmptyTextError("cannot embed empty text")
    normalized = normalize_for_hashing(text)
    if len(normalized) < 3:
        raise DegenerateTextError(
            f"text normalizes to {normalized!r}, too short for a trigram"
        )
    return EmbeddingVector(tuple(kernels.hash_embed(normalized, dim)))


def cache_key(provider_id: str, model_name: str, dim: int, text: str) -> str:
    """Stable 16-hex-char cache key for one (provider, model, dim, text)."""
    blob = "\x1f".join((provider_id, model_name, str(dim), text)).encode("utf-8")
    return f"{kernels.fnv1a64(blob):016x}"


class EmbeddingCache:
    """In-memory map of cache key -> vector, persisted one record per line.

    Line format: `<16 hex chars> <dim> <comma-separated decimal values>`.
    The file is append-only; unreadable lines are skipped on load so a
    torn tail write cannot poison the cache.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, tuple[float, ...]] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        assert self._path is not None
        for line in self._path.read_text(encoding="utf-8").splitlines():
            parts = line.strip().split(" ")
            if len(parts) != 3:
                continue
            key, dim_text, values_text = parts
            try:
                dim = int(dim_text)
                values = tuple(float(v) for v in values_text.split(","))
            except ValueError:
                continue
            if len(values) == dim:
                self._entries[key] = values

    def get(self, key: str) -> tuple[float, ...] | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, values: tuple[float, ...]) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = values
            if self._path is not None:
                record = f"{key} {len(values)} {','.join(repr(v) for v in values)}\n"
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as handle:
                    handle.write(record)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed_request(self, texts: Sequence[str]) -> list[tuple[float, ...]]:
        """One provider round-trip for up to max_batch texts."""


class LocalHashProvider:
    """Offline provider backed by the trigram-hash embedder."""

    provider_id = LOCALHASH

    def __init__(self, config: EmbeddingConfig):
        self._dim = config.dim

    def embed_request(self, texts: Sequence[str]) -> list[tuple[float, ...]]:
        out = []
        for index, text in enumerate(texts):
            try:
                out.append(local_hash_embed(text, self._dim).values)
            except EmbeddingError as exc:
                exc.item_index = index  # type: ignore[attr-defined]
                raise
        return out


class HttpPoster(Protocol):
    def post_json(
        self, url: str, headers: dict, payload: dict, timeout: float
    ) -> tuple[int, dict]: ...


class RequestsPoster:
    def __init__(self) -> None:
        self._session = requests.Session()

    def post_json(
        self, url: str, headers: dict, payload: dict, timeout: float
    ) -> tuple[int, dict]:
        response = self._session.post(url, headers=headers, json=payload, timeout=timeout)
        try:
            body = response.json()
        except ValueError:
            body = {}
        return response.status_code, body


RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.5


class RemoteEmbeddingProvider:
    """HTTP client for a hosted embeddings endpoint.

    Endpoint and credentials come from config or the EMBED_API_URL /
    EMBED_API_KEY environment variables; nothing is hard-coded. Transient
    failures (429/5xx/transport) are retried 3 times with exponential
    backoff starting at 500 ms.
    """

    provider_id = REMOTE

    def __init__(
        self,
        config: EmbeddingConfig,
        poster: HttpPoster | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._config = config
        self._url = config.api_url or os.environ.get("EMBED_API_URL") or ""
        self._key = config.api_key or os.environ.get("EMBED_API_KEY") or ""
        if not self._url:
            raise ConfigError("remote embedding provider needs EMBED_API_URL")
        self._poster = poster if poster is not None else RequestsPoster()
        self._sleeper = sleeper

    def embed_request(self, texts: Sequence[str]) -> list[tuple[float, ...]]:
        payload = {"model": self._config.model_name, "input": list(texts)}
        headers = {"Authorization": f"Bearer {self._key}"} if self._key else {}
        last_status: int | None = None
        for attempt in range(1, RETRY_ATTEMPTS + 1):
            try:
                status, body = self._poster.post_json(
                    self._url, headers, payload, self._config.request_timeout
                )
            except requests.RequestException as exc:
                last_status = None
                if attempt == RETRY_ATTEMPTS:
                    raise ProviderError(
                        f"embedding request failed: {exc}", status=None, attempts=attempt
                    ) from exc
            else:
                if status == 200:
                    return self._parse(body, len(texts))
                last_status = status
                if status not in (429,) and status < 500:
                    raise ProviderError(
                        f"embedding endpoint returned {status}",
                        status=status,
                        attempts=attempt,
                    )
                if attempt == RETRY_ATTEMPTS:
                    raise ProviderError(
                        f"embedding endpoint returned {status} after {attempt} attempts",
                        status=status,
                        attempts=attempt,
                    )
            self._sleeper(RETRY_BASE_DELAY * (2 ** (attempt - 1)))
        raise ProviderError("unreachable", status=last_status, attempts=RETRY_ATTEMPTS)

    def _parse(self, body: dict, expected: int) -> list[tuple[float, ...]]:
        data = body.get("data")
        if not isinstance(data, list) or len(data) != expected:
            raise ProviderError("embedding response shape mismatch", status=200)
        vectors = []
        for entry in data:
            values = tuple(float(v) for v in entry["embedding"])
            if len(values) != self._config.dim:
                raise ProviderError(
                    f"embedding dim {len(values)} != configured {self._config.dim}",
                    status=200,
                )
            vectors.append(values)
        return vectors


def make_provider(
    config: EmbeddingConfig,
    poster: HttpPoster | None = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> EmbeddingProvider:
    if config.provider == LOCALHASH:
        return LocalHashProvider(config)
    return RemoteEmbeddingProvider(config, poster=poster, sleeper=sleeper)


class EmbeddingClient:
    """Caching, batching front end over an embedding provider.

    Safe for concurrent use. Batches fan out to at most
    `max_parallel_requests` in-flight provider calls, each carrying at
    most `max_batch` texts, and outputs always line up with inputs.
    """

    def __init__(
        self,
        config: EmbeddingConfig | None = None,
        provider: EmbeddingProvider | None = None,
        cache: EmbeddingCache | None = None,
    ):
        self.config = config if config is not None else EmbeddingConfig()
        self._provider = provider if provider is not None else make_provider(self.config)
        self._cache = cache if cache is not None else EmbeddingCache(self.config.cache_path)

    def _key(self, text: str) -> str:
        return cache_key(
            self._provider.provider_id, self.config.model_name, self.config.dim, text
        )

    def embed_text(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        for index, text in enumerate(texts):
            if not text.strip():
                error = EmptyTextError(f"text at index {index} is empty")
                error.item_index = index  # type: ignore[attr-defined]
                raise error

        results: list[tuple[float, ...] | None] = [None] * len(texts)
        miss_indices: list[int] = []
        for index, text in enumerate(texts):
            cached = self._cache.get(self._key(text))
            if cached is not None:
                results[index] = cached
            else:
                miss_indices.append(index)

        if miss_indices:
            chunks = [
                miss_indices[start : start + self.config.max_batch]
                for start in range(0, len(miss_indices), self.config.max_batch)
            ]

            def fetch(chunk: list[int]) -> tuple[list[int], list[tuple[float, ...]]]:
                chunk_texts = [texts[i] for i in chunk]
                try:
                    return chunk, self._provider.embed_request(chunk_texts)
                except GroomerError as exc:
                    local = getattr(exc, "item_index", 0)
                    exc.item_index = chunk[local]  # type: ignore[attr-defined]
                    raise

            if len(chunks) == 1:
                fetched = [fetch(chunks[0])]
            else:
                with ThreadPoolExecutor(
                    max_workers=self.config.max_parallel_requests
                ) as pool:
                    futures = [pool.submit(fetch, chunk) for chunk in chunks]
                    fetched = []
                    first_error: GroomerError | None = None
                    for future in futures:
                        try:
                            fetched.append(future.result())
                        except GroomerError as exc:
                            if first_error is None or getattr(
                                exc, "item_index", 0
                            ) < getattr(first_error, "item_index", 0):
                                first_error = exc
                    if first_error is not None:
                        raise first_error

            for chunk, vectors in fetched:
                for index, values in zip(chunk, vectors):
                    self._cache.put(self._key(texts[index]), values)
                    results[index] = values

        out = []
        for values in results:
            assert values is not None
            out.append(EmbeddingVector(values))
        return out

    def embed_issues(self, snapshot: BacklogSnapshot) -> dict[str, EmbeddingVector]:
        """Embed every issue's summary+description text, keyed by issue key."""
        texts = [issue_text(issue) for issue in snapshot.issues]
        vectors = self.embed_batch(texts)
        return {issue.key: vec for issue, vec in zip(snapshot.issues, vectors)}
