"""Backlog tracker gateway: fetch snapshots, apply confirmed actions.

Two interchangeable modes: a local JSON fixture (the offline double,
mutated atomically via temp-file + rename) and a Jira-style REST API.
All tracker-specific paths and field shapes are confined here so that
supporting another tracker means writing only another gateway.

Merging is non-destructive by design: the survivor is updated, absorbed
issues are linked/commented and closed, never deleted.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import ConfigError, GroomerError
from .model import (
    BacklogSnapshot,
    CreateIssue,
    GroomingAction,
    Issue,
    IssueStatus,
    MergeCluster,
    UpdateStatus,
    format_timestamp,
    parse_timestamp,
    utc_now,
)

FIXTURE = "fixture"
REST = "rest"

APPLIED = "applied"
ALREADY_SATISFIED = "already-satisfied"
FAILED = "failed"


class GatewayError(GroomerError):
    pass


class AuthFailedError(GatewayError):
    pass


class ProjectNotFoundError(GatewayError):
    pass


class RateLimitedError(GatewayError):
    pass


class FixtureParseError(GatewayError):
    pass


class PartialFailureError(GatewayError):
    """Some apply sub-steps failed; the receipt says which.

    Retrying the same action is safe: steps that already took effect
    report themselves as already-satisfied.
    """

    def __init__(self, receipt: "ApplyReceipt"):
        failed = [step for step in receipt.steps if step.outcome == FAILED]
        super().__init__(
            f"{len(failed)} of {len(receipt.steps)} apply steps failed: "
            + "; ".join(f"{s.target}/{s.operation}: {s.detail}" for s in failed)
        )
        self.receipt = receipt


@dataclass(frozen=True)
class GatewayConfig:
    mode: str = FIXTURE
    fixture_path: str | Path | None = None
    base_url: str = ""
    project_key: str = ""
    token: str | None = None
    page_size: int = 50

    def __post_init__(self) -> None:
        if self.mode not in (FIXTURE, REST):
            raise ConfigError(f"unknown gateway mode: {self.mode!r}")
        if self.mode == FIXTURE and not self.fixture_path:
            raise ConfigError("fixture mode needs fixture_path")
        if self.mode == REST:
            if not self.base_url:
                raise ConfigError("rest mode needs base_url")
            if not self.project_key:
                raise ConfigError("rest mode needs project_key")
        if self.page_size < 1:
            raise ConfigError("page_size must be >= 1")


@dataclass(frozen=True)
class ApplyStep:
    target: str
    operation: str
    outcome: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "operation": self.operation,
            "outcome": self.outcome,
            "detail": self.detail,
        }


@dataclass
class ApplyReceipt:
    """Per-target outcomes of applying one grooming action."""

    action: dict
    steps: list[ApplyStep] = field(default_factory=list)
    created_keys: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(step.outcome != FAILED for step in self.steps)

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "steps": [step.to_dict() for step in self.steps],
            "created_keys": list(self.created_keys),
            "ok": self.ok,
        }


# --- snapshot/issue serialization (the on-disk and on-wire shapes) ----------


def issue_to_dict(issue: Issue) -> dict:
    return {
        "key": issue.key,
        "summary": issue.summary,
        "description": issue.description,
        "status": issue.status.value,
        "labels": sorted(issue.labels),
        "created_at": format_timestamp(issue.created_at),
        "updated_at": format_timestamp(issue.updated_at),
    }


def issue_from_dict(raw: dict) -> Issue:
    return Issue(
        key=raw["key"],
        summary=raw["summary"],
        description=raw.get("description", ""),
        status=IssueStatus(raw.get("status", "Open")),
        labels=frozenset(raw.get("labels", ())),
        created_at=parse_timestamp(raw["created_at"]),
        updated_at=parse_timestamp(raw["updated_at"]),
    )


def snapshot_to_dict(snapshot: BacklogSnapshot) -> dict:
    return {
        "project_key": snapshot.project_key,
        "fetched_at": format_timestamp(snapshot.fetched_at),
        "issues": [issue_to_dict(issue) for issue in snapshot.issues],
    }


def snapshot_from_dict(raw: dict) -> BacklogSnapshot:
    return BacklogSnapshot(
        project_key=raw["project_key"],
        issues=tuple(issue_from_dict(entry) for entry in raw["issues"]),
        fetched_at=parse_timestamp(raw["fetched_at"]),
    )


class _FetchApplyLock:
    """Many concurrent fetches OR one exclusive apply."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    def acquire_shared(self) -> None:
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1

    def release_shared(self) -> None:
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_exclusive(self) -> None:
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True

    def release_exclusive(self) -> None:
        with self._cond:
            self._writer = False
            self._cond.notify_all()


class FixtureGateway:
    """Gateway over a local JSON backlog file.

    File schema: {"project_key": str, "issues": [{key, summary,
    description, status, labels, created_at, updated_at, comments}]},
    timestamps RFC 3339. Mutations rewrite the whole file atomically.
    """

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.path = Path(config.fixture_path)  # type: ignore[arg-type]
        self._lock = _FetchApplyLock()

    # -- reading --------------------------------------------------------

    def _load(self) -> dict:
        try:
            raw = json.loads(self.path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise FixtureParseError(f"cannot read fixture {self.path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise FixtureParseError(
                f"fixture {self.path} is not valid JSON: {exc}"
            ) from exc
        if not isinstance(raw, dict) or "issues" not in raw or "project_key" not in raw:
            raise FixtureParseError(
                f"fixture {self.path} must be an object with project_key and issues"
            )
        return raw

    def fetch_backlog(self) -> BacklogSnapshot:
        self._lock.acquire_shared()
        try:
            raw = self._load()
            issues = []
            for entry in raw["issues"]:
                try:
                    issues.append(issue_from_dict(entry))
                except (KeyError, ValueError) as exc:
                    raise FixtureParseError(
                        f"fixture {self.path} has a malformed issue: {exc}"
                    ) from exc
            return BacklogSnapshot(
                project_key=raw["project_key"],
                issues=tuple(issues),
                fetched_at=utc_now(),
            )
        finally:
            self._lock.release_shared()

    # -- writing --------------------------------------------------------

    def _write_atomic(self, raw: dict) -> None:
        fd, tmp_name = tempfile.mkstemp(
            dir=str(self.path.parent), prefix=self.path.name, suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(raw, handle, indent=2)
                handle.write("\n")
            os.replace(tmp_name, self.path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    @staticmethod
    def _find(raw: dict, key: str) -> dict | None:
        for entry in raw["issues"]:
            if entry.get("key") == key:
                return entry
        return None

    @staticmethod
    def _touch(entry: dict) -> None:
        entry["updated_at"] = format_timestamp(utc_now())

    def apply_action(self, action: GroomingAction) -> ApplyReceipt:
        """Apply one confirmed action to the fixture file.

        Target issues are validated before anything is written, so a
        failed receipt means the file was not touched at all.
        """
        self._lock.acquire_exclusive()
        try:
            raw = self._load()
            receipt = ApplyReceipt(action=action.to_dict())
            if isinstance(action, MergeCluster):
                self._apply_merge(raw, action, receipt)
            elif isinstance(action, CreateIssue):
                self._apply_create(raw, action, receipt)
            elif isinstance(action, UpdateStatus):
                self._apply_update_status(raw, action, receipt)
            else:
                raise ValueError(f"unsupported action: {action!r}")
            if not receipt.ok:
                raise PartialFailureError(receipt)
            self._write_atomic(raw)
            return receipt
        finally:
            self._lock.release_exclusive()

    def _apply_merge(self, raw: dict, action: MergeCluster, receipt: ApplyReceipt) -> None:
        missing = [
            key
            for key in (action.survivor, *action.absorbed)
            if self._find(raw, key) is None
        ]
        if missing:
            for key in missing:
                receipt.steps.append(
                    ApplyStep(key, "lookup", FAILED, "issue not in fixture")
                )
            return

        survivor = self._find(raw, action.survivor)
        assert survivor is not None
        if (
            survivor.get("summary") == action.summary
            and survivor.get("description") == action.description
        ):
            receipt.steps.append(
                ApplyStep(action.survivor, "update-text", ALREADY_SATISFIED)
            )
        else:
            survivor["summary"] = action.summary
            survivor["description"] = action.description
            self._touch(survivor)
            receipt.steps.append(ApplyStep(action.survivor, "update-text", APPLIED))

        marker = f"Merged into {action.survivor}"
        for key in action.absorbed:
            entry = self._find(raw, key)
            assert entry is not None
            comments = entry.setdefault("comments", [])
            if marker in comments:
                receipt.steps.append(ApplyStep(key, "comment", ALREADY_SATISFIED))
            else:
                comments.append(marker)
                self._touch(entry)
                receipt.steps.append(ApplyStep(key, "comment", APPLIED))
            if entry.get("status") == IssueStatus.CLOSED.value:
                receipt.steps.append(ApplyStep(key, "close", ALREADY_SATISFIED))
            else:
                entry["status"] = IssueStatus.CLOSED.value
                self._touch(entry)
                receipt.steps.append(ApplyStep(key, "close", APPLIED))

    def _next_key(self, raw: dict) -> str:
        prefix = raw["project_key"]
        highest = 0
        for entry in raw["issues"]:
            key = entry.get("key", "")
            if key.startswith(prefix + "-"):
                suffix = key[len(prefix) + 1 :]
                if suffix.isdigit():
                    highest = max(highest, int(suffix))
        return f"{prefix}-{highest + 1}"

    def _apply_create(self, raw: dict, action: CreateIssue, receipt: ApplyReceipt) -> None:
        key = self._next_key(raw)
        now = format_timestamp(utc_now())
        raw["issues"].append(
            {
                "key": key,
                "summary": action.summary,
                "description": action.description,
                "status": IssueStatus.OPEN.value,
                "labels": sorted(action.labels),
                "created_at": now,
                "updated_at": now,
                "comments": [],
            }
        )
        receipt.created_keys.append(key)
        receipt.steps.append(ApplyStep(key, "create", APPLIED))

    def _apply_update_status(
        self, raw: dict, action: UpdateStatus, receipt: ApplyReceipt
    ) -> None:
        entry = self._find(raw, action.key)
        if entry is None:
            receipt.steps.append(
                ApplyStep(action.key, "lookup", FAILED, "issue not in fixture")
            )
            return
        if entry.get("status") == action.status.value:
            receipt.steps.append(ApplyStep(action.key, "transition", ALREADY_SATISFIED))
        else:
            entry["status"] = action.status.value
            self._touch(entry)
            receipt.steps.append(ApplyStep(action.key, "transition", APPLIED))


# --- REST mode ---------------------------------------------------------------


class RestTransport(Protocol):
    def request(
        self,
        method: str,
        url: str,
        headers: dict,
        params: dict | None,
        payload: dict | None,
        timeout: float,
    ) -> tuple[int, dict]: ...


class RequestsRestTransport:
    def __init__(self) -> None:
        self._session = requests.Session()

    def request(
        self,
        method: str,
        url: str,
        headers: dict,
        params: dict | None,
        payload: dict | None,
        timeout: float,
    ) -> tuple[int, dict]:
        response = self._session.request(
            method, url, headers=headers, params=params, json=payload, timeout=timeout
        )
        try:
            body = response.json()
        except ValueError:
            body = {}
        return response.status_code, body


# Jira status names seen in the wild mapped onto the four-state model.
_STATUS_NAMES = {
    "open": IssueStatus.OPEN,
    "to do": IssueStatus.OPEN,
    "todo": IssueStatus.OPEN,
    "backlog": IssueStatus.OPEN,
    "in progress": IssueStatus.IN_PROGRESS,
    "inprogress": IssueStatus.IN_PROGRESS,
    "done": IssueStatus.DONE,
    "resolved": IssueStatus.DONE,
    "closed": IssueStatus.CLOSED,
}


def _adf_to_text(node: object) -> str:
    """Flatten a Jira rich-text document to plain text."""
    if node is None:
        return ""
    if isinstance(node, str):
        return node
    if isinstance(node, list):
        return "".join(_adf_to_text(child) for child in node)
    if isinstance(node, dict):
        if node.get("type") == "text":
            return node.get("text", "")
        text = _adf_to_text(node.get("content", []))
        if node.get("type") == "paragraph":
            return text + "\n"
        return text
    return ""


def _text_to_adf(text: str) -> dict:
    paragraphs = [
        {
            "type": "paragraph",
            "content": [{"type": "text", "text": line}] if line else [],
        }
        for line in text.split("\n")
    ]
    return {"type": "doc", "version": 1, "content": paragraphs}


RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.5


class RestGateway:
    """Gateway over a Jira Cloud v3 style REST API.

    Touches exactly six endpoint families: JQL search, issue get, issue
    update, comment create, issue-link create and transition. The token
    comes from config or the JIRA_TOKEN environment variable.
    """

    def __init__(
        self,
        config: GatewayConfig,
        transport: RestTransport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._base = config.base_url.rstrip("/")
        self._token = config.token or os.environ.get("JIRA_TOKEN") or ""
        self._transport = transport if transport is not None else RequestsRestTransport()
        self._sleeper = sleeper
        self._lock = _FetchApplyLock()

    def _headers(self) -> dict:
        headers = {"Accept": "application/json"}
        if self._token:
            headers["Authorization"] = f"Bearer {self._token}"
        return headers

    def _call(
        self,
        method: str,
        path: str,
        params: dict | None = None,
        payload: dict | None = None,
    ) -> tuple[int, dict]:
        url = f"{self._base}{path}"
        for attempt in range(1, RETRY_ATTEMPTS + 1):
            try:
                status, body = self._transport.request(
                    method, url, self._headers(), params, payload, timeout=30.0
                )
            except requests.RequestException as exc:
                raise GatewayError(f"tracker unreachable: {exc}") from exc
            if status == 401 or status == 403:
                raise AuthFailedError(f"tracker rejected credentials ({status})")
            if status == 429:
                if attempt == RETRY_ATTEMPTS:
                    raise RateLimitedError(
                        f"tracker rate limit persisted across {attempt} attempts"
                    )
                self._sleeper(RETRY_BASE_DELAY * (2 ** (attempt - 1)))
                continue
            return status, body
        raise RateLimitedError("unreachable")

    def fetch_backlog(self) -> BacklogSnapshot:
        self._lock.acquire_shared()
        try:
            return self._fetch()
        finally:
            self._lock.release_shared()

    def _fetch(self) -> BacklogSnapshot:
        issues: list[Issue] = []
        start = 0
        while True:
            status, body = self._call(
                "GET",
                "/rest/api/3/search",
                params={
                    "jql": f'project = "{self.config.project_key}" ORDER BY key ASC',
                    "startAt": start,
                    "maxResults": self.config.page_size,
                    "fields": "summary,description,status,labels,created,updated",
                },
            )
            if status == 404:
                raise ProjectNotFoundError(
                    f"project {self.config.project_key!r} not found"
                )
            if status == 400:
                raise ProjectNotFoundError(
                    f"tracker rejected the project query: {body.get('errorMessages', body)}"
                )
            if status != 200:
                raise GatewayError(f"search returned {status}")
            page = body.get("issues", [])
            for raw in page:
                issues.append(self._parse_issue(raw))
            total = body.get("total", len(issues))
            start += len(page)
            if not page or start >= total:
                break
        return BacklogSnapshot(
            project_key=self.config.project_key,
            issues=tuple(issues),
            fetched_at=utc_now(),
        )

    @staticmethod
    def _parse_issue(raw: dict) -> Issue:
        fields = raw.get("fields", {})
        status_name = str(fields.get("status", {}).get("name", "Open"))
        status = _STATUS_NAMES.get(status_name.strip().lower(), IssueStatus.OPEN)
        description = _adf_to_text(fields.get("description")).rstrip("\n")
        created = parse_timestamp(_fix_jira_offset(fields.get("created", "")))
        updated = parse_timestamp(_fix_jira_offset(fields.get("updated", "")))
        return Issue(
            key=raw["key"],
            summary=fields.get("summary", ""),
            description=description,
            status=status,
            labels=frozenset(fields.get("labels", ())),
            created_at=created,
            updated_at=updated,
        )

    # -- apply ------------------------------------------------------------

    def apply_action(self, action: GroomingAction) -> ApplyReceipt:
        self._lock.acquire_exclusive()
        try:
            receipt = ApplyReceipt(action=action.to_dict())
            if isinstance(action, MergeCluster):
                self._apply_merge(action, receipt)
            elif isinstance(action, CreateIssue):
                self._apply_create(action, receipt)
            elif isinstance(action, UpdateStatus):
                self._transition(action.key, action.status, receipt)
            else:
                raise ValueError(f"unsupported action: {action!r}")
            if not receipt.ok:
                raise PartialFailureError(receipt)
            return receipt
        finally:
            self._lock.release_exclusive()

    def _step(
        self,
        receipt: ApplyReceipt,
        target: str,
        operation: str,
        method: str,
        path: str,
        payload: dict | None,
        ok_statuses: tuple[int, ...] = (200, 201, 204),
    ) -> bool:
        status, body = self._call(method, path, payload=payload)
        if status in ok_statuses:
            receipt.steps.append(ApplyStep(target, operation, APPLIED))
            return True
        receipt.steps.append(
            ApplyStep(target, operation, FAILED, f"HTTP {status}: {body}")
        )
        return False

    def _apply_merge(self, action: MergeCluster, receipt: ApplyReceipt) -> None:
        self._step(
            receipt,
            action.survivor,
            "update-text",
            "PUT",
            f"/rest/api/3/issue/{action.survivor}",
            {
                "fields": {
                    "summary": action.summary,
                    "description": _text_to_adf(action.description),
                }
            },
        )
        for key in action.absorbed:
            self._step(
                receipt,
                key,
                "link-duplicate",
                "POST",
                "/rest/api/3/issueLink",
                {
                    "type": {"name": "Duplicate"},
                    "inwardIssue": {"key": key},
                    "outwardIssue": {"key": action.survivor},
                },
            )
            self._step(
                receipt,
                key,
                "comment",
                "POST",
                f"/rest/api/3/issue/{key}/comment",
                {"body": _text_to_adf(f"Merged into {action.survivor}")},
            )
            self._transition(key, IssueStatus.CLOSED, receipt)

    def _apply_create(self, action: CreateIssue, receipt: ApplyReceipt) -> None:
        status, body = self._call(
            "POST",
            "/rest/api/3/issue",
            payload={
                "fields": {
                    "project": {"key": self.config.project_key},
                    "issuetype": {"name": "Task"},
                    "summary": action.summary,
                    "description": _text_to_adf(action.description),
                    "labels": sorted(action.labels),
                }
            },
        )
        if status in (200, 201) and "key" in body:
            receipt.created_keys.append(body["key"])
            receipt.steps.append(ApplyStep(body["key"], "create", APPLIED))
        else:
            receipt.steps.append(
                ApplyStep("(new)", "create", FAILED, f"HTTP {status}: {body}")
            )

    def _transition(
        self, key: str, target: IssueStatus, receipt: ApplyReceipt
    ) -> None:
        status, body = self._call(
            "GET", f"/rest/api/3/issue/{key}?fields=status", payload=None
        )
        if status == 200:
            current = str(body.get("fields", {}).get("status", {}).get("name", ""))
            if _STATUS_NAMES.get(current.strip().lower()) is target:
                receipt.steps.append(ApplyStep(key, "transition", ALREADY_SATISFIED))
                return
        status, body = self._call("GET", f"/rest/api/3/issue/{key}/transitions")
        if status != 200:
            receipt.steps.append(
                ApplyStep(key, "transition", FAILED, f"HTTP {status}: {body}")
            )
            return
        wanted = None
        for transition in body.get("transitions", []):
            name = str(transition.get("to", {}).get("name", ""))
            if _STATUS_NAMES.get(name.strip().lower()) is target:
                wanted = transition.get("id")
                break
        if wanted is None:
            receipt.steps.append(
                ApplyStep(
                    key, "transition", FAILED, f"no transition to {target.value}"
                )
            )
            return
        self._step(
            receipt,
            key,
            "transition",
            "POST",
            f"/rest/api/3/issue/{key}/transitions",
            {"transition": {"id": wanted}},
        )


def _fix_jira_offset(raw: str) -> str:
    # Jira emits "+0000" style offsets; RFC 3339 wants "+00:00".
    if len(raw) >= 5 and raw[-5] in "+-" and raw[-4:].isdigit():
        return f"{raw[:-2]}:{raw[-2:]}"
    return raw


Gateway = FixtureGateway | RestGateway


def make_gateway(
    config: GatewayConfig, transport: RestTransport | None = None
) -> Gateway:
    if config.mode == FIXTURE:
        return FixtureGateway(config)
    return RestGateway(config, transport=transport)
