from __future__ import annotations

from datetime import datetime, timezone
from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from backlog_groomer.model import (
    BacklogSnapshot,
    CreateIssue,
    IdenticalKeysError,
    Issue,
    IssuePair,
    MergeCluster,
    UpdateStatus,
    action_from_dict,
    canonicalize_pair,
    format_timestamp,
    issue_text,
    parse_timestamp,
)

T0 = datetime(2025, 3, 1, tzinfo=timezone.utc)


def make_issue(key: str, summary: str = "Something", description: str = "") -> Issue:
    return Issue(key=key, summary=summary, description=description, created_at=T0, updated_at=T0)


class TestIssue:
    def test_rejects_empty_key_and_summary(self):
        with pytest.raises(ValueError):
            Issue(key="", summary="x")
        with pytest.raises(ValueError):
            Issue(key="P-1", summary="")

    def test_rejects_created_after_updated(self):
        with pytest.raises(ValueError):
            Issue(
                key="P-1",
                summary="x",
                created_at=datetime(2025, 3, 2, tzinfo=timezone.utc),
                updated_at=T0,
            )

    def test_issue_text_joins_with_newline(self):
        issue = make_issue("P-1", "Login fails", "500 on POST")
        assert issue_text(issue) == "Login fails\n500 on POST"

    def test_issue_text_omits_empty_description(self):
        issue = make_issue("P-1", "Login fails", "")
        assert issue_text(issue) == "Login fails"

    def test_issue_text_deterministic(self):
        issue = make_issue("P-1", "Login fails", "500 on POST")
        assert issue_text(issue) == issue_text(issue)


class TestIssuePair:
    def test_canonical_order_forced(self):
        pair = canonicalize_pair("P-2", "P-1")
        assert (pair.a, pair.b) == ("P-1", "P-2")

    def test_already_canonical(self):
        pair = canonicalize_pair("P-1", "P-2")
        assert (pair.a, pair.b) == ("P-1", "P-2")

    def test_identical_keys_rejected(self):
        with pytest.raises(IdenticalKeysError):
            canonicalize_pair("P-1", "P-1")

    def test_lexicographic_not_numeric(self):
        pair = canonicalize_pair("P-2", "P-10")
        assert (pair.a, pair.b) == ("P-10", "P-2")

    @given(st.text(min_size=1, max_size=8), st.text(min_size=1, max_size=8))
    def test_symmetric_and_idempotent(self, a: str, b: str):
        if a == b:
            return
        pair = canonicalize_pair(a, b)
        assert pair == canonicalize_pair(b, a)
        assert canonicalize_pair(pair.a, pair.b) == pair
        assert pair.a < pair.b


class TestBacklogSnapshot:
    def test_sorts_by_key_and_rejects_duplicates(self):
        snap = BacklogSnapshot("P", (make_issue("P-2"), make_issue("P-1")))
        assert snap.keys() == ["P-1", "P-2"]
        with pytest.raises(ValueError):
            BacklogSnapshot("P", (make_issue("P-1"), make_issue("P-1")))

    def test_induces_n_choose_2_distinct_pairs(self):
        issues = tuple(make_issue(f"P-{i}") for i in range(1, 9))
        snap = BacklogSnapshot("P", issues)
        pairs = {IssuePair(a, b) for a, b in combinations(snap.keys(), 2)}
        n = len(snap)
        assert len(pairs) == n * (n - 1) // 2


class TestActions:
    def test_merge_invariants(self):
        with pytest.raises(ValueError):
            MergeCluster(survivor="P-1", absorbed=(), summary="s", description="")
        with pytest.raises(ValueError):
            MergeCluster(survivor="P-1", absorbed=("P-1",), summary="s", description="")

    def test_create_requires_summary(self):
        with pytest.raises(ValueError):
            CreateIssue(summary="")

    def test_round_trip_through_dicts(self):
        actions = [
            MergeCluster("P-1", ("P-2", "P-3"), "merged", "text"),
            CreateIssue("new issue", "detail", frozenset({"ops"})),
            UpdateStatus("P-4", status=make_issue("x").status),
        ]
        for action in actions:
            assert action_from_dict(action.to_dict()) == action


def test_timestamp_round_trip():
    raw = "2025-03-01T09:30:00Z"
    assert format_timestamp(parse_timestamp(raw)) == raw
    offset = parse_timestamp("2025-03-01T10:30:00+01:00")
    assert format_timestamp(offset) == "2025-03-01T09:30:00Z"
