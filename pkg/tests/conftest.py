from __future__ import annotations

import random
import shutil
from importlib import resources
from pathlib import Path

import pytest

from backlog_groomer.embedding import EmbeddingClient, EmbeddingConfig

FIXTURES = resources.files("backlog_groomer") / "fixtures"

WORDS = (
    "login checkout payment upload avatar timeout retry cache index export "
    "import report dashboard session token refund coupon inventory queue "
    "notification search filter sort page mobile android crash driver "
    "database migration webhook audit billing invoice shipping label tax "
    "discount catalog product order customer merchant admin settings theme"
).split()


def random_issue_text(rng: random.Random, min_words: int = 4, max_words: int = 18) -> str:
    count = rng.randint(min_words, max_words)
    return " ".join(rng.choice(WORDS) for _ in range(count))


@pytest.fixture()
def demo_backlog_path(tmp_path: Path) -> Path:
    """A mutable copy of the bundled 51-issue backlog fixture."""
    target = tmp_path / "demo_backlog.json"
    with resources.as_file(FIXTURES / "demo_backlog.json") as source:
        shutil.copy(source, target)
    return target


@pytest.fixture(scope="session")
def demo_truth_path(tmp_path_factory: pytest.TempPathFactory) -> Path:
    target = tmp_path_factory.mktemp("truth") / "demo_truth.csv"
    with resources.as_file(FIXTURES / "demo_truth.csv") as source:
        shutil.copy(source, target)
    return target


@pytest.fixture(scope="session")
def expected_scan() -> dict:
    import json

    return json.loads((FIXTURES / "expected_scan.json").read_text(encoding="utf-8"))


@pytest.fixture()
def embedder() -> EmbeddingClient:
    return EmbeddingClient(EmbeddingConfig())
