from __future__ import annotations

import json
import os
from pathlib import Path

import pytest

from backlog_groomer.errors import ConfigError
from backlog_groomer.gateway import (
    AuthFailedError,
    FixtureGateway,
    FixtureParseError,
    GatewayConfig,
    PartialFailureError,
    ProjectNotFoundError,
    RateLimitedError,
    RestGateway,
    issue_from_dict,
    make_gateway,
    snapshot_from_dict,
    snapshot_to_dict,
)
from backlog_groomer.model import (
    CreateIssue,
    IssueStatus,
    MergeCluster,
    UpdateStatus,
)


def write_fixture(path: Path, issues: list[dict], project: str = "P") -> Path:
    path.write_text(
        json.dumps({"project_key": project, "issues": issues}, indent=2),
        encoding="utf-8",
    )
    return path


def issue_entry(key: str, summary: str = "Summary", **overrides) -> dict:
    entry = {
        "key": key,
        "summary": summary,
        "description": "",
        "status": "Open",
        "labels": [],
        "created_at": "2025-03-01T09:00:00Z",
        "updated_at": "2025-03-01T09:00:00Z",
        "comments": [],
    }
    entry.update(overrides)
    if "created_at" in overrides and "updated_at" not in overrides:
        entry["updated_at"] = entry["created_at"]
    return entry


@pytest.fixture()
def fixture_path(tmp_path: Path) -> Path:
    return write_fixture(
        tmp_path / "backlog.json",
        [
            issue_entry("P-1", "First", created_at="2025-03-01T09:00:00Z"),
            issue_entry("P-3", "Third", created_at="2025-03-03T09:00:00Z"),
            issue_entry("P-2", "Second", created_at="2025-03-02T09:00:00Z"),
        ],
    )


def fixture_gateway(path: Path) -> FixtureGateway:
    return FixtureGateway(GatewayConfig(mode="fixture", fixture_path=path))


class TestGatewayConfig:
    def test_mode_fields_enforced(self):
        with pytest.raises(ConfigError):
            GatewayConfig(mode="fixture")
        with pytest.raises(ConfigError):
            GatewayConfig(mode="rest", base_url="")
        with pytest.raises(ConfigError):
            GatewayConfig(mode="rest", base_url="http://x", project_key="")


class TestFixtureFetch:
    def test_three_issues_keys_ascending(self, fixture_path):
        snap = fixture_gateway(fixture_path).fetch_backlog()
        assert snap.keys() == ["P-1", "P-2", "P-3"]
        assert snap.project_key == "P"
        assert snap.fetched_at is not None

    def test_malformed_json_names_path(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(FixtureParseError) as exc_info:
            fixture_gateway(bad).fetch_backlog()
        assert "broken.json" in str(exc_info.value)

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(FixtureParseError) as exc_info:
            fixture_gateway(tmp_path / "absent.json").fetch_backlog()
        assert "absent.json" in str(exc_info.value)

    def test_snapshot_round_trip(self, fixture_path):
        snap = fixture_gateway(fixture_path).fetch_backlog()
        assert snapshot_from_dict(snapshot_to_dict(snap)) == snap


class TestFixtureMerge:
    def test_merge_closes_and_comments_absorbed(self, fixture_path):
        gateway = fixture_gateway(fixture_path)
        action = MergeCluster(
            survivor="P-1", absorbed=("P-2",), summary="Merged", description="joined"
        )
        receipt = gateway.apply_action(action)
        assert receipt.ok
        raw = json.loads(fixture_path.read_text())
        by_key = {entry["key"]: entry for entry in raw["issues"]}
        assert by_key["P-1"]["summary"] == "Merged"
        assert by_key["P-1"]["description"] == "joined"
        assert by_key["P-2"]["status"] == "Closed"
        assert "Merged into P-1" in by_key["P-2"]["comments"]

    def test_replay_reports_already_satisfied(self, fixture_path):
        gateway = fixture_gateway(fixture_path)
        action = MergeCluster(
            survivor="P-1", absorbed=("P-2",), summary="Merged", description="joined"
        )
        gateway.apply_action(action)
        second = gateway.apply_action(action)
        assert second.ok
        assert {step.outcome for step in second.steps} == {"already-satisfied"}

    def test_fetch_after_apply_reflects_mutation(self, fixture_path):
        gateway = fixture_gateway(fixture_path)
        gateway.apply_action(
            MergeCluster(survivor="P-1", absorbed=("P-2",), summary="S", description="D")
        )
        snap = gateway.fetch_backlog()
        assert snap.get("P-2").status is IssueStatus.CLOSED
        assert snap.get("P-1").summary == "S"

    def test_unknown_target_fails_without_touching_file(self, fixture_path):
        gateway = fixture_gateway(fixture_path)
        before = fixture_path.read_text()
        with pytest.raises(PartialFailureError) as exc_info:
            gateway.apply_action(
                MergeCluster(
                    survivor="P-1", absorbed=("P-9",), summary="S", description="D"
                )
            )
        assert fixture_path.read_text() == before
        assert any(step.outcome == "failed" for step in exc_info.value.receipt.steps)

    def test_apply_touches_only_declared_targets(self, fixture_path):
        gateway = fixture_gateway(fixture_path)
        before = {
            entry["key"]: entry
            for entry in json.loads(fixture_path.read_text())["issues"]
        }
        gateway.apply_action(
            MergeCluster(survivor="P-1", absorbed=("P-2",), summary="S", description="D")
        )
        after = {
            entry["key"]: entry
            for entry in json.loads(fixture_path.read_text())["issues"]
        }
        assert after["P-3"] == before["P-3"]

    def test_crash_during_replace_leaves_old_file(self, fixture_path, monkeypatch):
        gateway = fixture_gateway(fixture_path)
        before = fixture_path.read_text()

        def boom(src, dst):
            raise OSError("simulated crash")

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(OSError):
            gateway.apply_action(
                MergeCluster(
                    survivor="P-1", absorbed=("P-2",), summary="S", description="D"
                )
            )
        monkeypatch.undo()
        assert fixture_path.read_text() == before
        assert not list(fixture_path.parent.glob("*.tmp"))


class TestFixtureCreateAndStatus:
    def test_create_assigns_max_plus_one(self, fixture_path):
        gateway = fixture_gateway(fixture_path)
        receipt = gateway.apply_action(CreateIssue(summary="Brand new"))
        assert receipt.created_keys == ["P-4"]
        snap = gateway.fetch_backlog()
        assert snap.get("P-4").summary == "Brand new"
        assert snap.get("P-4").status is IssueStatus.OPEN

    def test_update_status(self, fixture_path):
        gateway = fixture_gateway(fixture_path)
        receipt = gateway.apply_action(UpdateStatus("P-3", IssueStatus.DONE))
        assert receipt.ok
        assert gateway.fetch_backlog().get("P-3").status is IssueStatus.DONE
        replay = gateway.apply_action(UpdateStatus("P-3", IssueStatus.DONE))
        assert [step.outcome for step in replay.steps] == ["already-satisfied"]


class ScriptedTransport:
    """Routes (method, path) to canned responses and records every call."""

    def __init__(self):
        self.routes: dict[tuple[str, str], list[tuple[int, dict]]] = {}
        self.calls: list[tuple[str, str, dict | None, dict | None]] = []
        self.default: tuple[int, dict] | None = None

    def add(self, method: str, path: str, status: int, body: dict) -> None:
        self.routes.setdefault((method, path), []).append((status, body))

    def request(self, method, url, headers, params, payload, timeout):
        path = url.split("://", 1)[1].split("/", 1)[1]
        path = "/" + path.split("?")[0]
        self.calls.append((method, path, params, payload))
        queue = self.routes.get((method, path))
        if queue:
            return queue.pop(0) if len(queue) > 1 else queue[0]
        if self.default is not None:
            return self.default
        raise AssertionError(f"unexpected call: {method} {path}")


def rest_gateway(transport: ScriptedTransport, page_size: int = 50) -> RestGateway:
    config = GatewayConfig(
        mode="rest", base_url="http://jira.test", project_key="P", page_size=page_size
    )
    return RestGateway(config, transport=transport, sleeper=lambda _s: None)


def search_page(keys: list[str], total: int) -> dict:
    return {
        "total": total,
        "issues": [
            {
                "key": key,
                "fields": {
                    "summary": f"Issue {key}",
                    "description": {
                        "type": "doc",
                        "version": 1,
                        "content": [
                            {
                                "type": "paragraph",
                                "content": [{"type": "text", "text": f"Body {key}"}],
                            }
                        ],
                    },
                    "status": {"name": "To Do"},
                    "labels": [],
                    "created": "2025-03-01T09:00:00.000+0000",
                    "updated": "2025-03-01T09:00:00.000+0000",
                },
            }
            for key in keys
        ],
    }


class TestRestFetch:
    def test_pagination_120_issues_3_requests(self):
        transport = ScriptedTransport()
        keys = [f"P-{i}" for i in range(1, 121)]
        transport.add("GET", "/rest/api/3/search", 200, search_page(keys[:50], 120))
        transport.add("GET", "/rest/api/3/search", 200, search_page(keys[50:100], 120))
        transport.add("GET", "/rest/api/3/search", 200, search_page(keys[100:], 120))
        snap = rest_gateway(transport).fetch_backlog()
        searches = [c for c in transport.calls if c[1] == "/rest/api/3/search"]
        assert len(searches) == 3
        assert len(snap) == 120
        assert len(set(snap.keys())) == 120
        assert snap.get("P-7").description == "Body P-7"
        assert snap.get("P-7").status is IssueStatus.OPEN

    def test_auth_failure(self):
        transport = ScriptedTransport()
        transport.add("GET", "/rest/api/3/search", 401, {})
        with pytest.raises(AuthFailedError):
            rest_gateway(transport).fetch_backlog()

    def test_project_not_found(self):
        transport = ScriptedTransport()
        transport.add(
            "GET", "/rest/api/3/search", 400, {"errorMessages": ["project missing"]}
        )
        with pytest.raises(ProjectNotFoundError):
            rest_gateway(transport).fetch_backlog()

    def test_rate_limit_retried_then_surfaced(self):
        transport = ScriptedTransport()
        transport.add("GET", "/rest/api/3/search", 429, {})
        transport.add("GET", "/rest/api/3/search", 429, {})
        transport.add("GET", "/rest/api/3/search", 429, {})
        with pytest.raises(RateLimitedError):
            rest_gateway(transport).fetch_backlog()

    def test_rate_limit_recovers(self):
        transport = ScriptedTransport()
        transport.add("GET", "/rest/api/3/search", 429, {})
        transport.add("GET", "/rest/api/3/search", 200, search_page(["P-1"], 1))
        snap = rest_gateway(transport).fetch_backlog()
        assert snap.keys() == ["P-1"]


class TestRestApply:
    def test_merge_hits_expected_endpoints(self):
        transport = ScriptedTransport()
        transport.add("PUT", "/rest/api/3/issue/P-1", 204, {})
        transport.add("POST", "/rest/api/3/issueLink", 201, {})
        transport.add("POST", "/rest/api/3/issue/P-2/comment", 201, {})
        transport.add(
            "GET", "/rest/api/3/issue/P-2", 200, {"fields": {"status": {"name": "Open"}}}
        )
        transport.add(
            "GET",
            "/rest/api/3/issue/P-2/transitions",
            200,
            {"transitions": [{"id": "31", "to": {"name": "Closed"}}]},
        )
        transport.add("POST", "/rest/api/3/issue/P-2/transitions", 204, {})
        receipt = rest_gateway(transport).apply_action(
            MergeCluster(survivor="P-1", absorbed=("P-2",), summary="S", description="D")
        )
        assert receipt.ok
        operations = [step.operation for step in receipt.steps]
        assert operations == ["update-text", "link-duplicate", "comment", "transition"]

    def test_already_closed_is_success(self):
        transport = ScriptedTransport()
        transport.add("PUT", "/rest/api/3/issue/P-1", 204, {})
        transport.add("POST", "/rest/api/3/issueLink", 201, {})
        transport.add("POST", "/rest/api/3/issue/P-2/comment", 201, {})
        transport.add(
            "GET",
            "/rest/api/3/issue/P-2",
            200,
            {"fields": {"status": {"name": "Closed"}}},
        )
        receipt = rest_gateway(transport).apply_action(
            MergeCluster(survivor="P-1", absorbed=("P-2",), summary="S", description="D")
        )
        assert receipt.ok
        assert receipt.steps[-1].outcome == "already-satisfied"

    def test_partial_failure_carries_receipt(self):
        transport = ScriptedTransport()
        transport.add("PUT", "/rest/api/3/issue/P-1", 500, {"error": "boom"})
        transport.default = (204, {})
        transport.add(
            "GET", "/rest/api/3/issue/P-2", 200, {"fields": {"status": {"name": "Open"}}}
        )
        transport.add(
            "GET",
            "/rest/api/3/issue/P-2/transitions",
            200,
            {"transitions": [{"id": "31", "to": {"name": "Closed"}}]},
        )
        with pytest.raises(PartialFailureError) as exc_info:
            rest_gateway(transport).apply_action(
                MergeCluster(
                    survivor="P-1", absorbed=("P-2",), summary="S", description="D"
                )
            )
        receipt = exc_info.value.receipt
        assert any(s.outcome == "failed" for s in receipt.steps)
        assert any(s.outcome == "applied" for s in receipt.steps)

    def test_create_returns_new_key(self):
        transport = ScriptedTransport()
        transport.add("POST", "/rest/api/3/issue", 201, {"key": "P-77"})
        receipt = rest_gateway(transport).apply_action(CreateIssue(summary="New"))
        assert receipt.created_keys == ["P-77"]


def test_make_gateway_picks_mode(tmp_path, fixture_path):
    fixture = make_gateway(GatewayConfig(mode="fixture", fixture_path=fixture_path))
    assert isinstance(fixture, FixtureGateway)
    rest = make_gateway(
        GatewayConfig(mode="rest", base_url="http://x", project_key="P")
    )
    assert isinstance(rest, RestGateway)


def test_issue_from_dict_rejects_bad_status():
    entry = issue_entry("P-1", status="Nonsense")
    with pytest.raises(ValueError):
        issue_from_dict(entry)
