"""Classification metrics: confusion counts, mean class-wise accuracy,
ROC sweep with trapezoid AUC, minor-misclassification rate, and the
exact binomial McNemar test.

Percentages are kept at full precision internally; format_pct handles
the 2-decimal display rounding.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np

from .errors import (
    ConsistencyError,
    DegenerateLabelsError,
    EmptyInputError,
    UndefinedRateError,
    ValidationError,
)
from .fileio import atomic_write_text


@dataclass
class McNemarResult:
    b: int  # first model correct, second wrong
    c: int  # first model wrong, second correct
    p_value: float
    significant_at_95: bool


@dataclass
class EvalReport:
    confusion: np.ndarray  # 2x2 counts, rows actual (minor, adult), cols predicted
    acc_minor: float
    acc_adult: float
    mean_accuracy: float
    minor_misclassification_rate: float
    roc: list[tuple[float, float, float]]  # (fpr, tpr, threshold)
    auc: float
    mcnemar: McNemarResult | None = field(default=None)

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum())


def _as_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a flat sequence")
    arr = arr.astype(np.int64)
    bad = ~np.isin(arr, (0, 1))
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"{name}[{pos}] must be 0 or 1")
    return arr


def roc_points(scores, labels) -> list[tuple[float, float, float]]:
    """Sweep every distinct score plus sentinels beyond both extremes.

    A sample is called adult when its score >= threshold, so thresholds
    run high to low and the curve walks from (0,0) to (1,1). Rates come
    from integer counts, making the sweep order-independent.
    """
    labels = _as_binary(labels, "labels")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != labels.shape:
        raise ConsistencyError(f"{len(scores)} scores but {len(labels)} labels")
    if not np.isfinite(scores).all():
        raise ValidationError("scores must be finite")
    n_minor = int(np.sum(labels == 0))
    n_adult = int(np.sum(labels == 1))
    if n_minor == 0 or n_adult == 0:
        raise DegenerateLabelsError("ROC needs both classes present")

    minor_sorted = np.sort(scores[labels == 0])
    adult_sorted = np.sort(scores[labels == 1])
    distinct = np.unique(scores)
    thresholds = np.concatenate(([distinct[-1] + 1.0], distinct[::-1], [distinct[0] - 1.0]))

    points = []
    for t in thresholds:
        fp = n_minor - int(np.searchsorted(minor_sorted, t, side="left"))
        tp = n_adult - int(np.searchsorted(adult_sorted, t, side="left"))
        points.append((fp / n_minor, tp / n_adult, float(t)))
    return points


def roc_auc(points) -> float:
    """Trapezoid rule over the (fpr, tpr) polyline."""
    if len(points) < 2:
        raise EmptyInputError("AUC needs at least two ROC points")
    area = 0.0
    for (f0, t0, _), (f1, t1, _) in zip(points, points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2.0
    return area


def evaluate(predictions, scores, labels) -> EvalReport:
    """Confusion counts, per-class accuracies, ROC, and the minor
    misclassification rate in one pass. Class 0 is minor, 1 is adult."""
    predictions = _as_binary(predictions, "predictions")
    labels = _as_binary(labels, "labels")
    if len(predictions) != len(labels):
        raise ConsistencyError(f"{len(predictions)} predictions but {len(labels)} labels")
    if len(np.asarray(scores)) != len(labels):
        raise ConsistencyError(f"{len(np.asarray(scores))} scores but {len(labels)} labels")
    n_minor = int(np.sum(labels == 0))
    n_adult = int(np.sum(labels == 1))
    if n_minor == 0 or n_adult == 0:
        raise DegenerateLabelsError("evaluation needs both classes present")

    confusion = np.zeros((2, 2), dtype=np.int64)
    for actual in (0, 1):
        for predicted in (0, 1):
            confusion[actual, predicted] = np.sum(
                (labels == actual) & (predictions == predicted)
            )
    acc_minor = 100.0 * confusion[0, 0] / n_minor
    acc_adult = 100.0 * confusion[1, 1] / n_adult
    points = roc_points(scores, labels)
    return EvalReport(
        confusion=confusion,
        acc_minor=acc_minor,
        acc_adult=acc_adult,
        mean_accuracy=(acc_minor + acc_adult) / 2.0,
        minor_misclassification_rate=100.0 * confusion[0, 1] / n_minor,
        roc=points,
        auc=roc_auc(points),
    )


def minor_misclassification_rate(predictions, labels) -> float:
    """Percentage of minors called adult."""
    predictions = _as_binary(predictions, "predictions")
    labels = _as_binary(labels, "labels")
    if len(predictions) != len(labels):
        raise ConsistencyError(f"{len(predictions)} predictions but {len(labels)} labels")
    minor = labels == 0
    if not minor.any():
        raise UndefinedRateError("no minor samples, rate undefined")
    return 100.0 * int(np.sum(predictions[minor] == 1)) / int(np.sum(minor))


def mcnemar_test(correct_a, correct_b) -> McNemarResult:
    """Exact two-sided binomial test on the discordant pairs.

    p = min(1, 2 * sum_{i <= min(b,c)} C(n,i) / 2^n) with n = b + c,
    computed in exact rational arithmetic. No discordance means the
    models are indistinguishable: p = 1.
    """
    a = _as_binary(correct_a, "correct_a")
    bb = _as_binary(correct_b, "correct_b")
    if len(a) != len(bb):
        raise ConsistencyError(f"{len(a)} flags vs {len(bb)} flags")
    if len(a) == 0:
        raise EmptyInputError("McNemar test needs at least one paired outcome")
    b = int(np.sum((a == 1) & (bb == 0)))
    c = int(np.sum((a == 0) & (bb == 1)))
    n = b + c
    if n == 0:
        p = 1.0
    else:
        tail = sum(math.comb(n, i) for i in range(min(b, c) + 1))
        p = float(min(Fraction(1), Fraction(2 * tail, 2**n)))
    return McNemarResult(b=b, c=c, p_value=p, significant_at_95=p < 0.05)


def format_pct(value: float) -> str:
    """Round a percentage to 2 decimals for display.

    A pre-round at 1e-9 cancels binary representation error first, so
    92.084999999999994 and 92.085000000000008 both print as 92.09 while
    a genuine 92.0849 still prints 92.08.
    """
    d = Decimal(repr(float(value)))
    d = d.quantize(Decimal("1e-9"), rounding=ROUND_HALF_EVEN)
    return str(d.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def report_lines(report: EvalReport) -> list[str]:
    c = report.confusion
    lines = [
        f"samples: {report.n_samples}",
        f"minor_count: {int(c[0].sum())}",
        f"adult_count: {int(c[1].sum())}",
        f"confusion_minor_as_minor: {int(c[0, 0])}",
        f"confusion_minor_as_adult: {int(c[0, 1])}",
        f"confusion_adult_as_minor: {int(c[1, 0])}",
        f"confusion_adult_as_adult: {int(c[1, 1])}",
        f"acc_minor_pct: {format_pct(report.acc_minor)}",
        f"acc_adult_pct: {format_pct(report.acc_adult)}",
        f"mean_accuracy_pct: {format_pct(report.mean_accuracy)}",
        f"minor_misclassification_rate_pct: {format_pct(report.minor_misclassification_rate)}",
        f"roc_auc: {report.auc:.6f}",
    ]
    if report.mcnemar is not None:
        m = report.mcnemar
        lines += [
            f"mcnemar_b: {m.b}",
            f"mcnemar_c: {m.c}",
            f"mcnemar_p_value: {m.p_value:.9f}",
            f"mcnemar_significant_at_95: {str(m.significant_at_95).lower()}",
        ]
    return lines


def write_report(report: EvalReport, path) -> None:
    atomic_write_text(path, "\n".join(report_lines(report)) + "\n")


def write_roc_csv(report: EvalReport, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "fpr", "tpr"])
    for fpr, tpr, threshold in report.roc:
        writer.writerow([repr(threshold), repr(fpr), repr(tpr)])
    atomic_write_text(path, buf.getvalue())


def report_metrics_dict(report: EvalReport) -> dict:
    """Full-precision metric values for manifest embedding."""
    out = {
        "samples": report.n_samples,
        "confusion": [[int(v) for v in row] for row in report.confusion],
        "acc_minor": report.acc_minor,
        "acc_adult": report.acc_adult,
        "mean_accuracy": report.mean_accuracy,
        "minor_misclassification_rate": report.minor_misclassification_rate,
        "roc_auc": report.auc,
    }
    if report.mcnemar is not None:
        out["mcnemar"] = {
            "b": report.mcnemar.b,
            "c": report.mcnemar.c,
            "p_value": report.mcnemar.p_value,
            "significant_at_95": report.mcnemar.significant_at_95,
        }
    return out
