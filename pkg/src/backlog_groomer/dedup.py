"""Turns similarity hits into reviewable duplicate candidates and merges.

Detection embeds a backlog snapshot, scans all pairs above a threshold,
and wraps each hit as a Proposed candidate. Accepted candidates are
clustered with union-find (a pair review implies transitive groups), and
each cluster is drafted into one merge action.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from .embedding import EmbeddingClient
from .errors import ConfigError, GroomerError, UnknownIssueKeyError
from .index import VectorIndex
from .model import BacklogSnapshot, Issue, IssuePair, MergeCluster


class TooFewIssuesError(GroomerError):
    """Duplicate detection needs at least two issues."""


class DraftingFailedError(GroomerError):
    """The text drafter could not produce merged text."""


class SurvivorRule(Enum):
    EARLIEST_CREATED = "EarliestCreated"
    LOWEST_KEY = "LowestKey"


class CandidateStatus(Enum):
    PROPOSED = "Proposed"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class EngineConfig:
    """Thresholds and merge policy for the dedup engine.

    The 0.80 duplicate threshold is a conventional high-similarity cut,
    exposed as a knob rather than a constant; tune per corpus.
    """

    duplicate_threshold: float = 0.80
    new_issue_redundancy_threshold: float = 0.80
    survivor_rule: SurvivorRule = SurvivorRule.EARLIEST_CREATED

    def __post_init__(self) -> None:
        for name in ("duplicate_threshold", "new_issue_redundancy_threshold"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {value}")


@dataclass
class DuplicateCandidate:
    """One flagged pair awaiting a human verdict."""

    pair: IssuePair
    score: float
    status: CandidateStatus = CandidateStatus.PROPOSED
    proposed_action: MergeCluster | None = None


@dataclass(frozen=True)
class DuplicateCluster:
    """A connected component of accepted duplicate pairs."""

    members: frozenset[str]
    survivor: str
    supporting_pairs: tuple[tuple[IssuePair, float], ...]

    def __post_init__(self) -> None:
        if len(self.members) < 2:
            raise ValueError("a duplicate cluster needs at least 2 members")
        if self.survivor not in self.members:
            raise ValueError(f"survivor {self.survivor} is not a cluster member")


class UnionFind:
    """Disjoint sets over issue keys with path compression."""

    def __init__(self) -> None:
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)

    def components(self) -> dict[str, set[str]]:
        groups: dict[str, set[str]] = {}
        for key in self.parent:
            groups.setdefault(self.find(key), set()).add(key)
        return groups


TextDrafter = Callable[[list[Issue]], tuple[str, str]]


def choose_survivor(
    members: Iterable[str], snapshot: BacklogSnapshot, rule: SurvivorRule
) -> str:
    """Pick the issue that survives a merge; lexicographic key breaks ties."""
    keys = sorted(members)
    for key in keys:
        if snapshot.get(key) is None:
            raise UnknownIssueKeyError(f"issue {key!r} not in snapshot")
    if rule is SurvivorRule.LOWEST_KEY:
        return keys[0]
    return min(keys, key=lambda k: (snapshot.get(k).created_at, k))  # type: ignore[union-attr]


def fallback_merge_text(survivor: Issue, absorbed: list[Issue]) -> tuple[str, str]:
    """Deterministic merged text used when no model drafter is available.

    Keeps the survivor's summary; the description gains a
    "Merged from:" trailer plus the absorbed descriptions in key order.
    """
    absorbed_sorted = sorted(absorbed, key=lambda issue: issue.key)
    keys = ", ".join(issue.key for issue in absorbed_sorted)
    blocks = []
    if survivor.description:
        blocks.append(survivor.description)
    blocks.append(f"Merged from: {keys}")
    for issue in absorbed_sorted:
        if issue.description:
            blocks.append(issue.description)
    return survivor.summary, "\n\n".join(blocks)


def _pair_action(
    a: Issue, b: Issue, snapshot: BacklogSnapshot, rule: SurvivorRule
) -> MergeCluster:
    survivor_key = choose_survivor([a.key, b.key], snapshot, rule)
    survivor = a if a.key == survivor_key else b
    other = b if survivor is a else a
    summary, description = fallback_merge_text(survivor, [other])
    return MergeCluster(
        survivor=survivor.key,
        absorbed=(other.key,),
        summary=summary,
        description=description,
    )


def detect_duplicates(
    snapshot: BacklogSnapshot,
    config: EngineConfig,
    embedder: EmbeddingClient,
    threshold: float | None = None,
) -> list[DuplicateCandidate]:
    """Embed a snapshot and flag every pair at or above the threshold.

    Candidates come back Proposed, ordered by score descending (ties by
    pair), each carrying a drafted pairwise merge action for display.
    Deterministic whenever the embedding provider is.
    """
    if len(snapshot) < 2:
        raise TooFewIssuesError(
            f"need at least 2 issues to scan, snapshot has {len(snapshot)}"
        )
    cut = config.duplicate_threshold if threshold is None else threshold
    if not 0.0 < cut <= 1.0:
        raise ConfigError(f"threshold must be in (0, 1], got {cut}")

    vectors = embedder.embed_issues(snapshot)
    index = VectorIndex()
    for key, vector in vectors.items():
        index.upsert(key, vector)

    candidates = []
    for pair, score in index.pairwise_scan(cut):
        a = snapshot.get(pair.a)
        b = snapshot.get(pair.b)
        assert a is not None and b is not None
        candidates.append(
            DuplicateCandidate(
                pair=pair,
                score=score,
                proposed_action=_pair_action(a, b, snapshot, config.survivor_rule),
            )
        )
    return candidates


def cluster_accepted(
    accepted: list[DuplicateCandidate],
    snapshot: BacklogSnapshot,
    config: EngineConfig | None = None,
) -> list[DuplicateCluster]:
    """Union-find over accepted pairs; each component becomes one cluster.

    Clusters are built only from accepted candidates, never proposed
    ones: nothing reaches the tracker without a confirmation. Output is
    ordered by survivor key.
    """
    rule = (config or EngineConfig()).survivor_rule
    uf = UnionFind()
    for candidate in accepted:
        for key in candidate.pair:
            if snapshot.get(key) is None:
                raise UnknownIssueKeyError(f"issue {key!r} not in snapshot")
        uf.union(candidate.pair.a, candidate.pair.b)

    clusters = []
    for members in uf.components().values():
        if len(members) < 2:
            continue
        supporting = sorted(
            (
                (candidate.pair, candidate.score)
                for candidate in accepted
                if candidate.pair.a in members
            ),
            key=lambda entry: (-entry[1], entry[0]),
        )
        clusters.append(
            DuplicateCluster(
                members=frozenset(members),
                survivor=choose_survivor(members, snapshot, rule),
                supporting_pairs=tuple(supporting),
            )
        )
    clusters.sort(key=lambda c: c.survivor)
    return clusters


def propose_resolution(
    cluster: DuplicateCluster,
    snapshot: BacklogSnapshot,
    drafter: TextDrafter | None = None,
) -> MergeCluster:
    """Draft the merge action for one cluster.

    `drafter` receives the member issues sorted by key and returns the
    merged (summary, description); without one, the deterministic
    fallback text is used. Drafter failures surface as DraftingFailed so
    the caller can retry with the fallback.
    """
    issues = []
    for key in sorted(cluster.members):
        issue = snapshot.get(key)
        if issue is None:
            raise UnknownIssueKeyError(f"issue {key!r} not in snapshot")
        issues.append(issue)
    survivor = snapshot.get(cluster.survivor)
    assert survivor is not None
    absorbed = [issue for issue in issues if issue.key != cluster.survivor]

    if drafter is None:
        summary, description = fallback_merge_text(survivor, absorbed)
    else:
        try:
            summary, description = drafter(issues)
        except GroomerError as exc:
            raise DraftingFailedError(f"merge drafter failed: {exc}") from exc
        if not summary:
            raise DraftingFailedError("merge drafter returned an empty summary")

    return MergeCluster(
        survivor=cluster.survivor,
        absorbed=tuple(issue.key for issue in absorbed),
        summary=summary,
        description=description,
    )
