"""Core domain types: issues, backlog snapshots, canonical pairs, actions.

Everything here is immutable after construction and safe to share across
threads. Issue keys compare lexicographically by code point everywhere
(pair canonicalization, snapshot ordering), never numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import ClassVar, Union

from .errors import GroomerError


class IdenticalKeysError(GroomerError):
    """A pair of issue keys was expected to be distinct."""


class IssueStatus(Enum):
    OPEN = "Open"
    IN_PROGRESS = "InProgress"
    DONE = "Done"
    CLOSED = "Closed"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def parse_timestamp(raw: str) -> datetime:
    """Parse an RFC 3339 timestamp; a trailing 'Z' means UTC."""
    text = raw.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    moment = datetime.fromisoformat(text)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment.astimezone(timezone.utc)


def format_timestamp(moment: datetime) -> str:
    """Render a UTC timestamp in RFC 3339 with a 'Z' suffix."""
    return moment.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class Issue:
    """One backlog item: the unit being embedded, compared and merged."""

    key: str
    summary: str
    description: str = ""
    status: IssueStatus = IssueStatus.OPEN
    labels: frozenset[str] = field(default_factory=frozenset)
    created_at: datetime = field(default_factory=utc_now)
    updated_at: datetime = field(default_factory=utc_now)

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("issue key must be non-empty")
        if not self.summary:
            raise ValueError(f"issue {self.key}: summary must be non-empty")
        if not isinstance(self.labels, frozenset):
            object.__setattr__(self, "labels", frozenset(self.labels))
        if self.created_at > self.updated_at:
            raise ValueError(f"issue {self.key}: created_at is after updated_at")


def issue_text(issue: Issue) -> str:
    """The text that represents an issue for embedding purposes.

    Summary and description joined by a single newline; an empty
    description contributes nothing, not even the newline.
    """
    if issue.description:
        return f"{issue.summary}\n{issue.description}"
    return issue.summary


@dataclass(frozen=True)
class BacklogSnapshot:
    """All issues of one project at one fetch instant, ordered by key."""

    project_key: str
    issues: tuple[Issue, ...]
    fetched_at: datetime = field(default_factory=utc_now)

    def __post_init__(self) -> None:
        issues = tuple(sorted(self.issues, key=lambda issue: issue.key))
        keys = [issue.key for issue in issues]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate issue keys in snapshot: {', '.join(dupes)}")
        object.__setattr__(self, "issues", issues)

    def __len__(self) -> int:
        return len(self.issues)

    def keys(self) -> list[str]:
        return [issue.key for issue in self.issues]

    def get(self, key: str) -> Issue | None:
        for issue in self.issues:
            if issue.key == key:
                return issue
        return None


@dataclass(frozen=True, order=True)
class IssuePair:
    """An unordered pair of distinct issue keys, stored in canonical form.

    The constructor canonicalizes, so IssuePair(a, b) == IssuePair(b, a).
    """

    a: str
    b: str

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise IdenticalKeysError(f"pair members must differ: {self.a!r}")
        if self.a > self.b:
            first, second = self.b, self.a
            object.__setattr__(self, "a", first)
            object.__setattr__(self, "b", second)

    def __iter__(self):
        yield self.a
        yield self.b


def canonicalize_pair(a: str, b: str) -> IssuePair:
    """Canonical pair of two distinct keys, smaller key first."""
    return IssuePair(a, b)


class ActionKind(Enum):
    MERGE_CLUSTER = "MergeCluster"
    CREATE_ISSUE = "CreateIssue"
    UPDATE_STATUS = "UpdateStatus"


@dataclass(frozen=True)
class MergeCluster:
    """Fold a set of duplicate issues into one surviving issue."""

    survivor: str
    absorbed: tuple[str, ...]
    summary: str
    description: str

    kind: ClassVar[ActionKind] = ActionKind.MERGE_CLUSTER

    def __post_init__(self) -> None:
        if not self.absorbed:
            raise ValueError("merge needs at least one absorbed issue")
        if self.survivor in self.absorbed:
            raise ValueError(f"survivor {self.survivor} cannot also be absorbed")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "survivor": self.survivor,
            "absorbed": list(self.absorbed),
            "summary": self.summary,
            "description": self.description,
        }


@dataclass(frozen=True)
class CreateIssue:
    """Add a brand-new issue to the backlog."""

    summary: str
    description: str = ""
    labels: frozenset[str] = field(default_factory=frozenset)

    kind: ClassVar[ActionKind] = ActionKind.CREATE_ISSUE

    def __post_init__(self) -> None:
        if not self.summary:
            raise ValueError("new issue needs a non-empty summary")
        if not isinstance(self.labels, frozenset):
            object.__setattr__(self, "labels", frozenset(self.labels))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "summary": self.summary,
            "description": self.description,
            "labels": sorted(self.labels),
        }


@dataclass(frozen=True)
class UpdateStatus:
    """Transition an existing issue to a target status."""

    key: str
    status: IssueStatus

    kind: ClassVar[ActionKind] = ActionKind.UPDATE_STATUS

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "key": self.key, "status": self.status.value}


GroomingAction = Union[MergeCluster, CreateIssue, UpdateStatus]


def action_from_dict(raw: dict) -> GroomingAction:
    kind = raw.get("kind")
    if kind == ActionKind.MERGE_CLUSTER.value:
        return MergeCluster(
            survivor=raw["survivor"],
            absorbed=tuple(raw["absorbed"]),
            summary=raw["summary"],
            description=raw["description"],
        )
    if kind == ActionKind.CREATE_ISSUE.value:
        return CreateIssue(
            summary=raw["summary"],
            description=raw.get("description", ""),
            labels=frozenset(raw.get("labels", ())),
        )
    if kind == ActionKind.UPDATE_STATUS.value:
        return UpdateStatus(key=raw["key"], status=IssueStatus(raw["status"]))
    raise ValueError(f"unknown action kind: {kind!r}")
