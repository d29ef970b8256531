"""Acceptance suite: one test per release criterion, each time-budgeted.

Run with `pytest tests/test_acceptance.py -v` (add -s to watch the
per-criterion PASS lines stream).
"""
from __future__ import annotations

import json
import math
import random
import string
import time
from contextlib import contextmanager
from itertools import combinations
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from backlog_groomer.cli import main as cli_main
from backlog_groomer.dedup import EngineConfig, UnionFind, detect_duplicates
from backlog_groomer.embedding import local_hash_embed
from backlog_groomer.evaluation import (
    ConfusionMatrix,
    efficiency_comparison,
    load_ground_truth,
    load_pairs,
    metrics,
    render_confusion_matrix,
    score,
)
from backlog_groomer.gateway import ApplyReceipt, ApplyStep, FixtureGateway, GatewayConfig
from backlog_groomer.index import VectorIndex
from backlog_groomer.model import IssuePair, canonicalize_pair
from backlog_groomer.service import ReviewService, create_app
from backlog_groomer.suggest import MalformedModelOutputError, parse_model_output

from .conftest import random_issue_text
from .test_dedup import make_snapshot


@pytest.fixture()
def announce(capsys):
    @contextmanager
    def criterion(name: str, budget_seconds: float):
        start = time.perf_counter()
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"[acceptance] {name}: FAIL")
            raise
        elapsed = time.perf_counter() - start
        assert elapsed < budget_seconds, (
            f"{name} took {elapsed:.2f}s, budget {budget_seconds}s"
        )
        with capsys.disabled():
            print(f"[acceptance] {name}: PASS ({elapsed:.2f}s)")

    return criterion


# --- criterion 1: published evaluation-table golden --------------------------

# (participant, tp, fp, fn, tn, published P/R/A/F1 at 4 decimals)
TABLE_ROWS = [
    ("#8 Manual", 8, 1, 33, 1233, "0.8889", "0.1951", "0.9733", "0.3200"),
    ("#8 Auto", 15, 0, 26, 1234, "1.0000", "0.3659", "0.9796", "0.5986"),
    ("#11 Manual", 12, 1, 29, 1233, "0.9231", "0.2927", "0.9765", "0.4444"),
    ("#11 Auto", 20, 0, 21, 1234, "1.0000", "0.4878", "0.9835", "0.6557"),
    ("#9 Auto", 21, 0, 20, 1234, "1.0000", "0.5122", "0.9843", "0.6774"),
    ("#10 Manual", 7, 2, 34, 1232, "0.7778", "0.1707", "0.9718", "0.2800"),
    ("#12 Auto", 12, 0, 29, 1234, "1.0000", "0.2927", "0.9773", "0.4528"),
]

# The one cell of the published table that its own counts contradict:
# with tp=15, fp=0, fn=26 the F1 is 2*15/(2*15+0+26) = 30/56 = 0.5357,
# for ANY formula consistent with the printed precision/recall; the
# printed 0.5986 is unreachable. Asserted separately as a strict xfail
# so the discrepancy stays visible without hiding it behind a pass.
KNOWN_BAD_CELL = ("#8 Auto", "F1", "0.5986", "0.5357")


def test_criterion_1_metrics_table_golden(announce):
    with announce("table-1 golden (27/28 cells; 1 cell provably misprinted)", 1.0):
        for participant, tp, fp, fn, tn, p, r, a, f1 in TABLE_ROWS:
            report = metrics(ConfusionMatrix(tp, fp, fn, tn))
            cells = {
                "Precision": (f"{report.precision:.4f}", p),
                "Recall": (f"{report.recall:.4f}", r),
                "Accuracy": (f"{report.accuracy:.4f}", a),
                "F1": (f"{report.f1:.4f}", f1),
            }
            for metric_name, (computed, published) in cells.items():
                if (participant, metric_name) == KNOWN_BAD_CELL[:2]:
                    assert computed == KNOWN_BAD_CELL[3]
                    assert published == KNOWN_BAD_CELL[2]
                    continue
                assert computed == published, (
                    f"{participant} {metric_name}: computed {computed}, "
                    f"published {published}"
                )


@pytest.mark.xfail(
    strict=True,
    reason=(
        "published F1 for the '#8 Auto' row (0.5986) contradicts its own "
        "counts: tp=15, fp=0, fn=26 forces 30/56 = 0.5357"
    ),
)
def test_criterion_1_known_inconsistent_cell():
    report = metrics(ConfusionMatrix(15, 0, 26, 1234))
    assert f"{report.f1:.4f}" == "0.5986"


# --- criterion 2: pair-space consistency + confusion-matrix rendering --------


def test_criterion_2_pair_space_consistency(announce, demo_truth_path):
    with announce("pair-space consistency + 2x2 rendering", 1.0):
        truth = load_ground_truth(demo_truth_path)
        assert truth.n_issues == 51
        assert len(truth.true_pairs) == 41
        universe = [
            IssuePair(a, b)
            for a, b in combinations([f"GRM-{i}" for i in range(1, 52)], 2)
        ]
        assert len(universe) == 1275
        rng = random.Random(17)
        for _ in range(200):
            predicted = set(rng.sample(universe, rng.randint(0, 100)))
            cm = score(predicted, truth)
            assert cm.tp + cm.fp + cm.fn + cm.tn == 1275
            assert cm.tp + cm.fn == 41

        # the unattended-run counts force tn = 1226
        tool_only = ConfusionMatrix(tp=35, fp=8, fn=6, tn=1275 - 35 - 8 - 6)
        assert tool_only.tn == 1226
        assert render_confusion_matrix(tool_only) == (
            "                                     Actual\n"
            "                              Duplicate  Non-duplicate\n"
            "     Predicted Duplicate             35              8\n"
            " Predicted Non-duplicate              6           1226"
        )


# --- criterion 3: efficiency arithmetic ---------------------------------------


def test_criterion_3_efficiency_arithmetic(announce):
    with announce("time-per-duplicate efficiency arithmetic", 1.0):
        reduction = efficiency_comparison(174, 95)
        assert abs(reduction - 45.38) <= 0.5
        assert f"{reduction:.2f}" == "45.40"
        assert efficiency_comparison(120, 120) == 0.0
        assert efficiency_comparison(100, 0) == 100.0


# --- criterion 4: scan equals the brute-force oracle ---------------------------


def _oracle_scan(vectors: list[tuple[float, ...]], threshold: float) -> dict:
    """Brute-force double loop, written independently of the index."""
    norms = [math.sqrt(math.fsum(x * x for x in vec)) for vec in vectors]
    hits = {}
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            dot = 0.0
            for a, b in zip(vectors[i], vectors[j]):
                dot += a * b
            s = dot / (norms[i] * norms[j])
            if s >= threshold:
                hits[(i, j)] = s
    return hits


def test_criterion_4_oracle_equivalence_randomized(announce, embedder):
    rng = random.Random(20250401)
    sizes = (
        [rng.randint(2, 80) for _ in range(40)]
        + [rng.randint(81, 160) for _ in range(8)]
        + [200, 200]
    )
    with announce(f"pairwise scan == oracle on {len(sizes)} random backlogs", 30.0):
        for round_number, n in enumerate(sizes):
            texts = [
                f"{random_issue_text(rng)} marker {round_number} {i}"
                for i in range(n)
            ]
            embedded = embedder.embed_batch(texts)
            vectors = [vec.values for vec in embedded]
            keys = [f"T-{i:03d}" for i in range(n)]
            position = {key: i for i, key in enumerate(keys)}

            index = VectorIndex()
            for key, vec in zip(keys, embedded):
                index.upsert(key, vec)
            threshold = rng.uniform(0.05, 0.95)

            ours = index.pairwise_scan(threshold)
            expected = _oracle_scan(vectors, threshold)
            ours_by_index = {
                (position[pair.a], position[pair.b]): s for pair, s in ours
            }
            assert set(ours_by_index) == set(expected), (
                f"round {round_number}: pair sets differ at threshold {threshold}"
            )
            for pair_index, s in ours_by_index.items():
                assert abs(s - expected[pair_index]) < 1e-9

        # closed-threshold semantics: a cut equal to an observed score keeps
        # the pair that produced it (scores recompute identically)
        boundary = index.pairwise_scan(0.05)
        assert boundary, "word-salad backlogs always share some trigrams"
        cut_pair, cut_score = boundary[len(boundary) // 2]
        rescanned = dict(index.pairwise_scan(cut_score))
        assert rescanned[cut_pair] == cut_score


# --- criterion 5: property suite ----------------------------------------------


class _GateProbeGateway:
    """Fixture-backed reads; mutations recorded, never performed."""

    def __init__(self, path):
        self.inner = FixtureGateway(GatewayConfig(mode="fixture", fixture_path=path))
        self.mutations = []

    def fetch_backlog(self):
        return self.inner.fetch_backlog()

    def apply_action(self, action):
        self.mutations.append(action)
        receipt = ApplyReceipt(action=action.to_dict())
        receipt.steps.append(ApplyStep("probe", "noop", "applied"))
        return receipt


def test_criterion_5_property_suite(announce, embedder, demo_backlog_path):
    rng = random.Random(424242)
    with announce("property suite", 60.0):
        # cosine symmetry, bounds, scale invariance (exact symmetry, 1e-9 scale)
        from backlog_groomer.index import cosine as vec_cosine
        from backlog_groomer.embedding import EmbeddingVector

        for _ in range(200):
            d = rng.randint(2, 32)
            u = EmbeddingVector(tuple(rng.uniform(-1, 1) for _ in range(d)))
            v = EmbeddingVector(tuple(rng.uniform(-1, 1) for _ in range(d)))
            s = vec_cosine(u, v)
            assert vec_cosine(v, u) == s
            assert -1.0 - 1e-9 <= s <= 1.0 + 1e-9
            c = rng.uniform(0.01, 100.0)
            scaled = EmbeddingVector(tuple(c * x for x in u.values))
            assert abs(vec_cosine(scaled, v) - s) < 1e-9

        # canonical-pair idempotence and symmetry
        for _ in range(300):
            a = "K-" + "".join(rng.choices(string.ascii_uppercase, k=3))
            b = "K-" + "".join(rng.choices(string.ascii_uppercase, k=3))
            if a == b:
                continue
            pair = canonicalize_pair(a, b)
            assert pair == canonicalize_pair(b, a)
            assert canonicalize_pair(pair.a, pair.b) == pair

        # local-hash determinism and unit norm
        for _ in range(100):
            text = random_issue_text(rng)
            vec = local_hash_embed(text)
            assert vec == local_hash_embed(text)
            assert abs(sum(x * x for x in vec.values) - 1.0) < 1e-9

        # union-find partition property on random pair sets
        for _ in range(30):
            keys = [f"N-{i:02d}" for i in range(rng.randint(4, 24))]
            uf = UnionFind()
            for _ in range(rng.randint(1, 30)):
                a, b = rng.sample(keys, 2)
                uf.union(a, b)
            components = list(uf.components().values())
            flat = [k for component in components for k in component]
            assert len(flat) == len(set(flat))

        # threshold monotonicity of detection on a real snapshot
        entries = [
            (f"P-{i}", f"summary {i}", random_issue_text(rng, 5, 10)) for i in range(20)
        ]
        snapshot = make_snapshot(entries)
        previous: set | None = None
        for threshold in (0.9, 0.7, 0.5, 0.3, 0.1):
            found = {
                (c.pair.a, c.pair.b)
                for c in detect_duplicates(
                    snapshot, EngineConfig(), embedder, threshold=threshold
                )
            }
            if previous is not None:
                assert previous <= found
            previous = found

        # parser totality on fuzzed model outputs
        corpus = [
            "", "null", "[]", "{}", "[{]", '["a"]', "[{}]",
            '[{"summary":"s","description":"d","rationale":"r"}]',
            '[{"summary":1,"description":"d","rationale":"r"}]',
        ]
        for _ in range(500):
            kind = rng.randrange(3)
            if kind == 0:
                raw = "".join(
                    rng.choices(string.printable + "é∆{}[]\"", k=rng.randint(0, 80))
                )
            elif kind == 1:
                base = rng.choice(corpus)
                position = rng.randrange(max(1, len(base) + 1))
                raw = base[:position] + rng.choice('{}[]",:x') + base[position:]
            else:
                raw = rng.choice(corpus)
            try:
                result = parse_model_output(raw)
                assert isinstance(result, list)
            except MalformedModelOutputError:
                pass

        # confirmation gate: undecided items cause zero gateway mutations
        gateway = _GateProbeGateway(demo_backlog_path)
        service = ReviewService(gateway=gateway, embedder=embedder)
        client = TestClient(create_app(service))
        sid = client.post("/api/sessions", json={"mode": "interactive"}).json()["id"]
        assert client.post(f"/api/sessions/{sid}/apply").status_code == 409
        assert gateway.mutations == []
        candidates = client.get(f"/api/sessions/{sid}/candidates").json()
        client.post(
            f"/api/sessions/{sid}/decisions",
            json={"target": candidates[-1]["id"], "verdict": "accept"},
        )
        client.post(f"/api/sessions/{sid}/apply")
        touched = set()
        for action in gateway.mutations:
            touched.add(action.survivor)
            touched.update(action.absorbed)
        accepted_pair = candidates[-1]["pair"]
        assert touched == {accepted_pair["a"], accepted_pair["b"]}


# --- criterion 6: end-to-end unattended run ------------------------------------


def test_criterion_6_end_to_end_auto_groom(
    announce, capsys, demo_backlog_path, demo_truth_path, tmp_path
):
    with announce("end-to-end auto groom on the bundled fixture", 10.0):
        pairs_out = tmp_path / "predicted.csv"
        code = cli_main(
            [
                "groom",
                "--auto",
                "--fixture",
                str(demo_backlog_path),
                "--pairs-out",
                str(pairs_out),
            ]
        )
        stdout = capsys.readouterr().out
        assert code == 0
        payload = json.loads(stdout)
        assert payload["receipts"] and all(r["ok"] for r in payload["receipts"])

        # the fixture copy was rewritten atomically: valid JSON, merges applied
        raw = json.loads(Path(demo_backlog_path).read_text())
        assert len(raw["issues"]) == 51
        closed = {e["key"] for e in raw["issues"] if e["status"] == "Closed"}
        assert len(closed) == 15
        assert not list(Path(demo_backlog_path).parent.glob("*.tmp"))

        # scored against the bundled truth: every applied pair is a true pair
        truth = load_ground_truth(demo_truth_path)
        cm = score(load_pairs(pairs_out), truth)
        report = metrics(cm)
        assert report.precision == 1.0
        assert cm.fp == 0
        assert cm.tp == 31
