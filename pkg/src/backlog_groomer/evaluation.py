"""Scores predicted duplicate pairs against labeled ground truth.

Scoring happens in pair space: a backlog of n issues induces n(n-1)/2
unordered pairs, and every pair is classified duplicate / non-duplicate.
A resolved k-issue cluster counts as its C(k,2) pairs throughout.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable

from .errors import GroomerError, UnknownIssueKeyError
from .model import IdenticalKeysError, IssuePair


class ParseError(GroomerError):
    def __init__(self, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line


class SelfPairError(ParseError):
    pass


class NonPositiveBaselineError(GroomerError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    """The labeled duplicate pairs over a backlog of n issues."""

    n_issues: int
    true_pairs: frozenset[IssuePair]
    issue_keys: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.n_issues < 2:
            raise ValueError("ground truth needs at least 2 issues")
        if len(self.true_pairs) > self.total_pairs:
            raise ValueError("more true pairs than the pair space holds")
        if self.issue_keys is not None:
            if len(self.issue_keys) != self.n_issues:
                raise ValueError(
                    f"{len(self.issue_keys)} keys but n_issues={self.n_issues}"
                )
            for pair in self.true_pairs:
                for key in pair:
                    if key not in self.issue_keys:
                        raise UnknownIssueKeyError(
                            f"true pair member {key!r} not in the issue universe"
                        )

    @property
    def total_pairs(self) -> int:
        return self.n_issues * (self.n_issues - 1) // 2


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    accuracy: float
    f1: float
    time_seconds: float = 0.0
    seconds_per_tp: float | None = None


def score(predicted: Iterable[IssuePair], truth: GroundTruth) -> ConfusionMatrix:
    """Classify every pair of the universe against the truth labels."""
    predicted_set = set(predicted)
    if truth.issue_keys is not None:
        for pair in predicted_set:
            for key in pair:
                if key not in truth.issue_keys:
                    raise UnknownIssueKeyError(
                        f"predicted pair member {key!r} not in the issue universe"
                    )
    tp = len(predicted_set & truth.true_pairs)
    fp = len(predicted_set - truth.true_pairs)
    fn = len(truth.true_pairs - predicted_set)
    tn = truth.total_pairs - tp - fp - fn
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def metrics(cm: ConfusionMatrix, time_seconds: float = 0.0) -> MetricsReport:
    """Precision/recall/accuracy/F1 plus timing for one run.

    Conventions: an empty prediction set scores precision 1.0 (nothing
    claimed, nothing wrong); F1 is 0 when precision + recall is 0.
    Values are kept at full precision; round only at display time.
    """
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 1.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 1.0
    accuracy = (cm.tp + cm.tn) / cm.total if cm.total else 1.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    seconds_per_tp = time_seconds / cm.tp if cm.tp > 0 else None
    return MetricsReport(
        precision=precision,
        recall=recall,
        accuracy=accuracy,
        f1=f1,
        time_seconds=time_seconds,
        seconds_per_tp=seconds_per_tp,
    )


def efficiency_comparison(
    manual_seconds_per_tp: float, assisted_seconds_per_tp: float
) -> float:
    """Percent reduction of time-per-duplicate relative to the manual rate."""
    if manual_seconds_per_tp <= 0:
        raise NonPositiveBaselineError(
            f"manual baseline must be positive, got {manual_seconds_per_tp}"
        )
    return 100.0 * (manual_seconds_per_tp - assisted_seconds_per_tp) / manual_seconds_per_tp


def expand_clusters(clusters: Iterable[Iterable[str]]) -> set[IssuePair]:
    """The C(k,2) pairs implied by resolved clusters of issue keys."""
    pairs: set[IssuePair] = set()
    for members in clusters:
        for a, b in combinations(sorted(set(members)), 2):
            pairs.add(IssuePair(a, b))
    return pairs


def load_pairs(path: str | Path) -> set[IssuePair]:
    """Read a pair CSV: header issue_a,issue_b; '#' lines are comments.

    Duplicate rows (in either order) collapse to one canonical pair.
    """
    pairs, _ = _read_pair_file(Path(path))
    return pairs


def load_ground_truth(
    path: str | Path, issue_keys: Iterable[str] | None = None
) -> GroundTruth:
    """Read labeled truth pairs plus the issue-universe size.

    n comes from an '#n=<count>' comment line, or from `issue_keys` when
    supplied (which also enables membership validation).
    """
    pairs, n_from_file = _read_pair_file(Path(path))
    keys = frozenset(issue_keys) if issue_keys is not None else None
    if keys is not None:
        n = len(keys)
    elif n_from_file is not None:
        n = n_from_file
    else:
        raise ParseError(
            f"{path}: missing '#n=' header and no issue universe supplied"
        )
    return GroundTruth(n_issues=n, true_pairs=frozenset(pairs), issue_keys=keys)


def _read_pair_file(path: Path) -> tuple[set[IssuePair], int | None]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    pairs: set[IssuePair] = set()
    n: int | None = None
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            if text[1:].strip().startswith("n="):
                try:
                    n = int(text.split("=", 1)[1].strip())
                except ValueError as exc:
                    raise ParseError(f"bad #n= header: {text!r}", lineno) from exc
            continue
        if not header_seen:
            if text != "issue_a,issue_b":
                raise ParseError(
                    f"expected header 'issue_a,issue_b', got {text!r}", lineno
                )
            header_seen = True
            continue
        parts = text.split(",")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError(f"expected two issue keys, got {text!r}", lineno)
        a, b = parts[0].strip(), parts[1].strip()
        try:
            pairs.add(IssuePair(a, b))
        except IdenticalKeysError as exc:
            raise SelfPairError(f"pair of an issue with itself: {a!r}", lineno) from exc
    if not header_seen:
        raise ParseError(f"{path} has no 'issue_a,issue_b' header")
    return pairs, n


def write_pairs(pairs: Iterable[IssuePair], path: str | Path, n: int | None = None) -> None:
    """Write pairs in the CSV shape load_pairs/load_ground_truth read."""
    lines = []
    if n is not None:
        lines.append(f"#n={n}")
    lines.append("issue_a,issue_b")
    for pair in sorted(pairs):
        lines.append(f"{pair.a},{pair.b}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- presentation ------------------------------------------------------------

REPORT_COLUMNS = (
    "Participant",
    "TP",
    "FP",
    "FN",
    "TN",
    "Time",
    "Precision",
    "Recall",
    "Accuracy",
    "F1",
)


def report_row(participant: str, cm: ConfusionMatrix, report: MetricsReport) -> dict:
    """One result row in the fixed column order, metrics at 4 decimals."""
    return {
        "Participant": participant,
        "TP": cm.tp,
        "FP": cm.fp,
        "FN": cm.fn,
        "TN": cm.tn,
        "Time": report.time_seconds,
        "Precision": round(report.precision, 4),
        "Recall": round(report.recall, 4),
        "Accuracy": round(report.accuracy, 4),
        "F1": round(report.f1, 4),
    }


def rows_to_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2) + "\n"


def rows_to_csv(rows: list[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row["Participant"],
                row["TP"],
                row["FP"],
                row["FN"],
                row["TN"],
                row["Time"],
                f"{row['Precision']:.4f}",
                f"{row['Recall']:.4f}",
                f"{row['Accuracy']:.4f}",
                f"{row['F1']:.4f}",
            ]
        )
    return buffer.getvalue()


def render_confusion_matrix(cm: ConfusionMatrix) -> str:
    """2x2 text table: predicted label rows against actual label columns."""
    width = max(len(str(v)) for v in (cm.tp, cm.fp, cm.fn, cm.tn))
    width = max(width, len("Non-duplicate"))
    rows = [
        f"{'':>24}  {'Actual':^{2 * width + 2}}",
        f"{'':>24}  {'Duplicate':>{width}}  {'Non-duplicate':>{width}}",
        f"{'Predicted Duplicate':>24}  {cm.tp:>{width}}  {cm.fp:>{width}}",
        f"{'Predicted Non-duplicate':>24}  {cm.fn:>{width}}  {cm.tn:>{width}}",
    ]
    return "\n".join(row.rstrip() for row in rows)
