"""Chat-model providers that draft merged text and propose new issues.

Model output is parsed strictly (a JSON array of objects with summary /
description / rationale), and every surviving suggestion is checked for
redundancy against the existing backlog before a user ever sees it.
A deterministic mock provider keeps the whole pipeline offline.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .dedup import EngineConfig
from .embedding import EmbeddingClient, HttpPoster, RequestsPoster
from .errors import ConfigError, GroomerError, ProviderError
from .index import VectorIndex
from .model import BacklogSnapshot, Issue

MOCK = "mock"
REMOTE = "remote"

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.5


class MalformedModelOutputError(GroomerError):
    """Model output did not match the required structured schema."""

    def __init__(self, reason: str, position: int | None = None):
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{reason}{where}")
        self.reason = reason
        self.position = position


@dataclass(frozen=True)
class ChatConfig:
    """Provider selection and decoding limits for chat-model calls."""

    provider: str = MOCK
    model_name: str = "mock-chat"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    request_timeout: float = 60.0
    prompts_dir: str | Path | None = None
    api_url: str | None = None
    api_key: str | None = None

    def __post_init__(self) -> None:
        if self.provider not in (MOCK, REMOTE):
            raise ConfigError(f"unknown chat provider: {self.provider!r}")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class SuggestionRequest:
    """Inputs for proposing new backlog items."""

    project_description: str
    issue_digest: tuple[tuple[str, str], ...]
    user_prompt: str = ""
    max_suggestions: int = 5

    def __post_init__(self) -> None:
        keys = [key for key, _ in self.issue_digest]
        if len(set(keys)) != len(keys):
            raise ValueError("issue digest keys must be unique")
        if self.max_suggestions < 1:
            raise ValueError("max_suggestions must be >= 1")


@dataclass
class IssueSuggestion:
    """A proposed new backlog item, scored for redundancy."""

    summary: str
    description: str
    rationale: str
    redundancy_score: float | None = None


class ChatProvider(Protocol):
    def complete(self, messages: list[dict]) -> str:
        """One chat completion; returns the model's text response."""


_DEFAULT_MOCK_SUGGESTIONS = json.dumps(
    [
        {
            "summary": "Automate regression smoke checks before release",
            "description": (
                "Wire a scheduled job that runs the regression smoke suite "
                "against the staging build and posts failures to the team channel."
            ),
            "rationale": "Recurring manual verification steps slow down every release.",
        },
        {
            "summary": "Document onboarding steps for new contributors",
            "description": (
                "Write a contributor guide covering environment setup, coding "
                "standards, and the review workflow, and link it from the project home."
            ),
            "rationale": "Setup knowledge currently lives only in people's heads.",
        },
    ]
)


class MockChatProvider:
    """Deterministic offline chat stand-in.

    Pops canned responses in order when given any; otherwise returns a
    fixed suggestion payload. Identical inputs always produce identical
    outputs, which makes full-pipeline golden tests possible.
    """

    provider_id = MOCK

    def __init__(self, responses: Sequence[str] | None = None):
        self._responses = list(responses) if responses else []
        self.calls: list[list[dict]] = []

    def complete(self, messages: list[dict]) -> str:
        self.calls.append(messages)
        if self._responses:
            return self._responses.pop(0)
        return _DEFAULT_MOCK_SUGGESTIONS


class RemoteChatProvider:
    """HTTP client for a hosted chat-completions endpoint.

    Endpoint and credentials come from config or CHAT_API_URL /
    CHAT_API_KEY; retry policy mirrors the embedding client.
    """

    provider_id = REMOTE

    def __init__(
        self,
        config: ChatConfig,
        poster: HttpPoster | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._config = config
        self._url = config.api_url or os.environ.get("CHAT_API_URL") or ""
        self._key = config.api_key or os.environ.get("CHAT_API_KEY") or ""
        if not self._url:
            raise ConfigError("remote chat provider needs CHAT_API_URL")
        self._poster = poster if poster is not None else RequestsPoster()
        self._sleeper = sleeper

    def complete(self, messages: list[dict]) -> str:
        payload = {
            "model": self._config.model_name,
            "temperature": self._config.temperature,
            "max_tokens": self._config.max_output_tokens,
            "messages": messages,
        }
        headers = {"Authorization": f"Bearer {self._key}"} if self._key else {}
        for attempt in range(1, RETRY_ATTEMPTS + 1):
            try:
                status, body = self._poster.post_json(
                    self._url, headers, payload, self._config.request_timeout
                )
            except requests.RequestException as exc:
                if attempt == RETRY_ATTEMPTS:
                    raise ProviderError(
                        f"chat request failed: {exc}", status=None, attempts=attempt
                    ) from exc
            else:
                if status == 200:
                    try:
                        return body["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError) as exc:
                        raise ProviderError(
                            "chat response shape mismatch", status=200, attempts=attempt
                        ) from exc
                if status not in (429,) and status < 500:
                    raise ProviderError(
                        f"chat endpoint returned {status}", status=status, attempts=attempt
                    )
                if attempt == RETRY_ATTEMPTS:
                    raise ProviderError(
                        f"chat endpoint returned {status} after {attempt} attempts",
                        status=status,
                        attempts=attempt,
                    )
            self._sleeper(RETRY_BASE_DELAY * (2 ** (attempt - 1)))
        raise ProviderError("unreachable", attempts=RETRY_ATTEMPTS)


def make_chat_provider(
    config: ChatConfig,
    poster: HttpPoster | None = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> ChatProvider:
    if config.provider == MOCK:
        return MockChatProvider()
    return RemoteChatProvider(config, poster=poster, sleeper=sleeper)


def load_prompt(name: str, prompts_dir: str | Path | None = None) -> str:
    """Load a prompt template by file name.

    Templates are versioned text assets, not code: a custom directory
    overrides the packaged defaults.
    """
    if prompts_dir is not None:
        return (Path(prompts_dir) / name).read_text(encoding="utf-8")
    return (resources.files("backlog_groomer") / "prompts" / name).read_text(
        encoding="utf-8"
    )


def render_template(template: str, mapping: dict[str, str]) -> str:
    """Substitute {name} placeholders for the given names only.

    Deliberately not str.format: stray braces in issue text must pass
    through untouched.
    """
    out = template
    for name, value in mapping.items():
        out = out.replace("{" + name + "}", value)
    return out


def parse_model_output(raw: str) -> list[IssueSuggestion]:
    """Parse a model response into suggestions; strict but total.

    Accepts exactly one shape: a JSON array of objects, each with string
    summary (non-empty), description and rationale. Anything else raises
    MalformedModelOutput with a position and reason; no partial results.
    """
    if not isinstance(raw, str):
        raise MalformedModelOutputError(f"expected text, got {type(raw).__name__}")
    try:
        parsed = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedModelOutputError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(parsed, list):
        raise MalformedModelOutputError(
            f"expected a JSON array, got {type(parsed).__name__}"
        )
    suggestions = []
    for position, entry in enumerate(parsed):
        if not isinstance(entry, dict):
            raise MalformedModelOutputError(
                f"array element is {type(entry).__name__}, expected object", position
            )
        for key in ("summary", "description", "rationale"):
            if not isinstance(entry.get(key), str):
                raise MalformedModelOutputError(
                    f"element missing string field {key!r}", position
                )
        if not entry["summary"].strip():
            raise MalformedModelOutputError("element has an empty summary", position)
        suggestions.append(
            IssueSuggestion(
                summary=entry["summary"].strip(),
                description=entry["description"],
                rationale=entry["rationale"],
            )
        )
    return suggestions


def _parse_merge_output(raw: str) -> tuple[str, str]:
    try:
        parsed = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedModelOutputError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(parsed, dict):
        raise MalformedModelOutputError(
            f"expected a JSON object, got {type(parsed).__name__}"
        )
    summary = parsed.get("summary")
    description = parsed.get("description")
    if not isinstance(summary, str) or not summary.strip():
        raise MalformedModelOutputError("object needs a non-empty string 'summary'")
    if not isinstance(description, str):
        raise MalformedModelOutputError("object needs a string 'description'")
    return summary.strip(), description


def _complete_with_reformat(
    provider: ChatProvider,
    messages: list[dict],
    parser: Callable[[str], object],
) -> object:
    """One completion plus at most one reformat retry on malformed output."""
    raw = provider.complete(messages)
    try:
        return parser(raw)
    except MalformedModelOutputError as first:
        retry_messages = messages + [
            {"role": "assistant", "content": raw},
            {
                "role": "user",
                "content": (
                    f"Your previous reply was rejected: {first}. "
                    "Respond again with ONLY the JSON described before, no prose."
                ),
            },
        ]
        return parser(provider.complete(retry_messages))


def _issue_block(issues: Sequence[Issue]) -> str:
    lines = []
    for issue in issues:
        lines.append(f"[{issue.key}] {issue.summary}")
        if issue.description:
            lines.append(issue.description)
        lines.append("")
    return "\n".join(lines).strip()


def draft_merge_text(
    issues: list[Issue],
    config: ChatConfig,
    provider: ChatProvider | None = None,
) -> tuple[str, str]:
    """One coherent (summary, description) covering all input issues.

    The mock provider is a fixed rule: the summary of the first issue by
    ascending key, and all descriptions joined by "\\n---\\n" in key
    order. The remote provider must answer with a JSON object carrying
    summary and description.
    """
    if len(issues) < 2:
        raise ValueError("merge drafting needs at least 2 issues")
    ordered = sorted(issues, key=lambda issue: issue.key)
    if config.provider == MOCK:
        summary = ordered[0].summary
        description = "\n---\n".join(issue.description for issue in ordered)
        return summary, description

    if provider is None:
        provider = make_chat_provider(config)
    template = load_prompt("merge_issues.txt", config.prompts_dir)
    prompt = render_template(template, {"issue_block": _issue_block(ordered)})
    result = _complete_with_reformat(
        provider, [{"role": "user", "content": prompt}], _parse_merge_output
    )
    return result  # type: ignore[return-value]


def make_merge_drafter(
    config: ChatConfig, provider: ChatProvider | None = None
) -> Callable[[list[Issue]], tuple[str, str]]:
    """Adapter so the dedup engine can call the chat drafter."""

    def drafter(issues: list[Issue]) -> tuple[str, str]:
        return draft_merge_text(issues, config, provider)

    return drafter


def suggestion_text(suggestion: IssueSuggestion) -> str:
    """Embedding text for a suggestion; same join rule as issues."""
    if suggestion.description:
        return f"{suggestion.summary}\n{suggestion.description}"
    return suggestion.summary


def suggest_new_issues(
    request: SuggestionRequest,
    snapshot: BacklogSnapshot,
    embedder: EmbeddingClient,
    engine_config: EngineConfig,
    config: ChatConfig,
    provider: ChatProvider | None = None,
) -> list[IssueSuggestion]:
    """Ask the model for new backlog items and drop redundant ones.

    Every parsed suggestion is embedded and compared against all existing
    issues; anything whose best cosine similarity reaches the redundancy
    threshold is filtered out. Survivors carry their redundancy score and
    keep the model's ordering.
    """
    if provider is None:
        provider = make_chat_provider(config)

    digest = "\n".join(f"{key}: {summary}" for key, summary in request.issue_digest)
    template = load_prompt("suggest_issues.txt", config.prompts_dir)
    prompt = render_template(
        template,
        {
            "project_description": request.project_description,
            "issue_digest": digest,
            "user_prompt": request.user_prompt or "(none)",
            "max_suggestions": str(request.max_suggestions),
        },
    )
    parsed = _complete_with_reformat(
        provider, [{"role": "user", "content": prompt}], parse_model_output
    )
    suggestions: list[IssueSuggestion] = parsed[: request.max_suggestions]  # type: ignore[index]
    if not suggestions:
        return []

    existing = embedder.embed_issues(snapshot)
    indexed = VectorIndex()
    for key, vector in existing.items():
        indexed.upsert(key, vector)

    kept = []
    for suggestion in suggestions:
        vector = embedder.embed_batch([suggestion_text(suggestion)])[0]
        best = indexed.top_k(vector, k=1)[0]
        suggestion.redundancy_score = best.score
        if best.score < engine_config.new_issue_redundancy_threshold:
            kept.append(suggestion)
    return kept
