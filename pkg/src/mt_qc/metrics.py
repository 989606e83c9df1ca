"""
Evaluation metrics for quality classification.

The headline metric is R@P_t: the highest recall of the `good` class over all
operating points whose precision reaches t. Operating points come from the
distinct score values (predict good iff score >= threshold, equal scores enter
together); precision with no predicted positives is undefined and never
qualifies. A regression model is compared by sweeping a TER threshold instead
(predict good iff predicted TER <= tau).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .corpus import DEFAULT_EPSILON
from .errors import ConfigError, DegenerateVariance, NoPositives, ShapeError

logger = logging.getLogger("mt-qc.metrics")

SWEEP_LOW = 0.0
SWEEP_HIGH = 0.5
SWEEP_STEP = 0.01


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    predicted_positive: int
    true_positive: int
    total_positives: int

    @property
    def precision(self) -> float | None:
        if self.predicted_positive == 0:
            return None
        return self.true_positive / self.predicted_positive

    @property
    def recall(self) -> float:
        return self.true_positive / self.total_positives

    def meets(self, t: float) -> bool:
        precision = self.precision
        return precision is not None and precision >= t


@dataclass(frozen=True)
class PRCurve:
    """Operating points ordered so predicted positives never decrease."""

    points: tuple[OperatingPoint, ...]
    total_positives: int
    n: int

    def __len__(self) -> int:
        return len(self.points)

    def recall_at_precision(self, t: float) -> float:
        _check_target(t)
        return max((p.recall for p in self.points if p.meets(t)), default=0.0)

    def best_point(self, t: float) -> OperatingPoint | None:
        """Qualifying point with the highest recall; the first one wins ties."""
        _check_target(t)
        best: OperatingPoint | None = None
        for point in self.points:
            if point.meets(t) and (best is None or point.recall > best.recall):
                best = point
        return best

    @property
    def max_precision(self) -> float:
        """Highest defined precision on the curve, 0.0 if nothing is ever predicted."""
        return max((p.precision for p in self.points if p.precision is not None), default=0.0)

    def operating_summary(self, t: float) -> OperatingSummary:
        point = self.best_point(t)
        if point is None:
            return OperatingSummary(t, None, None, 0.0, 0.0, 0.0)
        false_positive = point.predicted_positive - point.true_positive
        return OperatingSummary(
            target=t,
            threshold=point.threshold,
            precision=point.precision,
            recall=point.recall,
            coverage=point.predicted_positive / self.n,
            fp_share=false_positive / self.n,
        )


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float | None:
        predicted = self.tp + self.fp
        return self.tp / predicted if predicted else None

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        precision, recall = self.precision, self.recall
        if precision is None or precision + recall == 0:
            return 0.0
        return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class OperatingSummary:
    """Where a model would run at precision t and what share of output it labels good."""

    target: float
    threshold: float | None
    precision: float | None
    recall: float
    coverage: float
    fp_share: float


@dataclass(frozen=True)
class SweepResult:
    curve: PRCurve

    @property
    def max_precision(self) -> float:
        return self.curve.max_precision

    def recall_at_precision(self, t: float) -> float:
        return self.curve.recall_at_precision(t)


def _check_target(t: float) -> None:
    if not 0.0 < t <= 1.0:
        raise ConfigError(f"precision target must be in (0, 1], got {t}")


def _scores_and_labels(scores: ArrayLike, labels: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores but {y.size} labels")
    if s.size == 0:
        raise ShapeError("no scores to evaluate")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    y_int = y.astype(np.int64)
    if y_int.sum() == 0:
        raise NoPositives("evaluation set has no positive (good) labels")
    return s, y_int


def pr_curve(scores: ArrayLike, labels: ArrayLike) -> PRCurve:
    """
    One operating point per distinct score, highest threshold first.

    Raises:
        NoPositives: if no label is 1
        ShapeError: if scores and labels differ in length
    """
    s, y = _scores_and_labels(scores, labels)
    order = np.argsort(s, kind="mergesort")[::-1]
    s, y = s[order], y[order]
    tps = np.cumsum(y)
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    total = int(tps[-1])
    points = tuple(
        OperatingPoint(float(s[i]), int(i + 1), int(tps[i]), total) for i in ends
    )
    return PRCurve(points, total, int(s.size))


def r_at_p(scores: ArrayLike, labels: ArrayLike, t: float) -> float:
    """Max recall over operating points with precision >= t; 0.0 if none qualifies."""
    _check_target(t)
    return pr_curve(scores, labels).recall_at_precision(t)


def confusion(scores: ArrayLike, labels: ArrayLike, threshold: float) -> Confusion:
    """2x2 counts under the rule score >= threshold."""
    s, y = _scores_and_labels(scores, labels)
    predicted = s >= threshold
    tp = int(np.sum(predicted & (y == 1)))
    fp = int(np.sum(predicted & (y == 0)))
    fn = int(np.sum(~predicted & (y == 1)))
    tn = int(np.sum(~predicted & (y == 0)))
    return Confusion(tp, fp, fn, tn)


def f1(scores: ArrayLike, labels: ArrayLike, threshold: float = 0.5) -> float:
    return confusion(scores, labels, threshold).f1


def operating_summary(scores: ArrayLike, labels: ArrayLike, t: float) -> OperatingSummary:
    """Threshold, precision, recall, coverage and false-positive share at the R@P_t point."""
    return pr_curve(scores, labels).operating_summary(t)


def _pair(preds: ArrayLike, golds: ArrayLike, minimum: int = 1) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    p = np.asarray(preds, dtype=np.float64).ravel()
    g = np.asarray(golds, dtype=np.float64).ravel()
    if p.shape != g.shape:
        raise ShapeError(f"{p.size} predictions but {g.size} gold values")
    if p.size < minimum:
        raise ShapeError(f"need at least {minimum} values, got {p.size}")
    return p, g


def mae(preds: ArrayLike, golds: ArrayLike) -> float:
    p, g = _pair(preds, golds)
    return float(np.mean(np.abs(p - g)))


def rmse(preds: ArrayLike, golds: ArrayLike) -> float:
    p, g = _pair(preds, golds)
    return math.sqrt(float(np.mean((p - g) ** 2)))


def pearson(preds: ArrayLike, golds: ArrayLike) -> float:
    """
    Pearson correlation, clipped to [-1, 1].

    Raises:
        DegenerateVariance: if either side is constant
    """
    p, g = _pair(preds, golds, minimum=2)
    dp, dg = p - p.mean(), g - g.mean()
    denominator = math.sqrt(float(dp @ dp) * float(dg @ dg))
    if denominator == 0.0:
        raise DegenerateVariance("pearson is undefined for a constant series")
    return float(np.clip(float(dp @ dg) / denominator, -1.0, 1.0))


def sweep_thresholds(low: float = SWEEP_LOW, high: float = SWEEP_HIGH, step: float = SWEEP_STEP) -> NDArray[np.float64]:
    """Grid low, low+step, ..., high (inclusive), rounded to kill float drift."""
    if not step > 0 or high < low:
        raise ConfigError(f"invalid sweep interval [{low}, {high}] with step {step}")
    count = int(round((high - low) / step))
    return np.round(low + step * np.arange(count + 1), 10)


def regression_threshold_sweep(
    predicted_ters: ArrayLike,
    labels: ArrayLike,
    low: float = SWEEP_LOW,
    high: float = SWEEP_HIGH,
    step: float = SWEEP_STEP,
) -> SweepResult:
    """
    Turn a TER regressor into a good/bad classifier at every tau of the grid.

    Points are ordered by ascending tau, so predicted positives never decrease.

    Raises:
        NoPositives: if no label is 1
    """
    preds, y = _scores_and_labels(predicted_ters, labels)
    total = int(y.sum())
    points = []
    for tau in sweep_thresholds(low, high, step):
        predicted = preds <= tau
        points.append(
            OperatingPoint(float(tau), int(predicted.sum()), int(np.sum(predicted & (y == 1))), total)
        )
    result = SweepResult(PRCurve(tuple(points), total, int(preds.size)))
    logger.debug(f"Sweep over {len(points)} thresholds: max precision {result.max_precision:.4f}")
    return result


def binary_labels(hters: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> list[int]:
    """Good (1) iff hter <= epsilon, the same rule labels a split."""
    return [1 if h <= epsilon else 0 for h in hters]
