"""
Tests for R@P_t, PR curves, F1, regression metrics and the TER-threshold sweep.
"""

import math

import numpy as np
import pytest

from mt_qc.errors import ConfigError, DegenerateVariance, NoPositives, ShapeError
from mt_qc.metrics import (
    confusion,
    f1,
    mae,
    operating_summary,
    pearson,
    pr_curve,
    r_at_p,
    regression_threshold_sweep,
    rmse,
    sweep_thresholds,
)

SCORE_GRID = np.round(np.linspace(0.05, 0.95, 10), 2)


def brute_force_r_at_p(scores, labels, t):
    """Try every threshold-induced subset directly."""
    total = sum(labels)
    best = 0.0
    for threshold in set(scores):
        chosen = [y for s, y in zip(scores, labels) if s >= threshold]
        tp = sum(chosen)
        if chosen and tp / len(chosen) >= t:
            best = max(best, tp / total)
    return best


def random_instance(rng):
    n = int(rng.integers(1, 13))
    scores = [float(x) for x in rng.choice(SCORE_GRID, size=n)]
    labels = [int(x) for x in rng.integers(0, 2, size=n)]
    labels[int(rng.integers(0, n))] = 1
    return scores, labels


class TestPRCurve:
    def test_two_points_by_hand(self):
        curve = pr_curve([0.9, 0.1], [1, 0])
        assert [p.threshold for p in curve.points] == [0.9, 0.1]
        assert [(p.precision, p.recall) for p in curve.points] == [(1.0, 1.0), (0.5, 1.0)]

    def test_ties_are_grouped(self):
        curve = pr_curve([0.3, 0.3, 0.3], [1, 0, 1])
        assert len(curve) == 1
        assert curve.points[0].predicted_positive == 3

    def test_no_positives(self):
        with pytest.raises(NoPositives):
            pr_curve([0.1, 0.2], [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            pr_curve([0.1, 0.2], [1])

    def test_monotone_counts(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            curve = pr_curve(*random_instance(rng))
            predicted = [p.predicted_positive for p in curve.points]
            recalls = [p.recall for p in curve.points]
            assert predicted == sorted(predicted)
            assert recalls == sorted(recalls)


class TestRecallAtPrecision:
    def test_perfect_separation(self):
        for t in (0.1, 0.5, 0.9, 1.0):
            assert r_at_p([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0], t) == 1.0

    def test_two_thirds(self):
        assert r_at_p([0.9, 0.8, 0.7, 0.4], [1, 1, 0, 1], 0.8) == pytest.approx(2 / 3)

    def test_no_qualifying_point(self):
        assert r_at_p([0.6, 0.5], [0, 1], 0.9) == 0.0

    @pytest.mark.parametrize("t", [0.0, -0.1, 1.5])
    def test_target_out_of_range(self, t):
        with pytest.raises(ConfigError):
            r_at_p([0.9], [1], t)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            scores, labels = random_instance(rng)
            for t in (0.5, 0.8, 0.9, 1.0):
                assert r_at_p(scores, labels, t) == brute_force_r_at_p(scores, labels, t)

    def test_non_increasing_in_t(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            scores, labels = random_instance(rng)
            values = [r_at_p(scores, labels, t) for t in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)]
            assert values == sorted(values, reverse=True)

    def test_increasing_transform_changes_nothing(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            scores, labels = random_instance(rng)
            transformed = [math.exp(3 * s) - 2 for s in scores]
            before = [(p.precision, p.recall) for p in pr_curve(scores, labels).points]
            after = [(p.precision, p.recall) for p in pr_curve(transformed, labels).points]
            assert before == after

    def test_permutation_changes_nothing(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            scores, labels = random_instance(rng)
            order = rng.permutation(len(scores))
            shuffled = ([scores[i] for i in order], [labels[i] for i in order])
            for t in (0.5, 0.9):
                assert r_at_p(*shuffled, t) == r_at_p(scores, labels, t)


class TestConfusionAndF1:
    def test_perfect_predictions(self):
        assert f1([0.9, 0.8, 0.1], [1, 1, 0], 0.5) == 1.0

    def test_zero_predicted_positives(self):
        counts = confusion([0.1, 0.2], [1, 0], 0.5)
        assert counts.precision is None
        assert counts.f1 == 0.0

    def test_counts_sum_to_n(self):
        counts = confusion([0.9, 0.6, 0.4, 0.2, 0.5], [1, 0, 1, 0, 0], 0.5)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (1, 2, 1, 1)
        assert counts.total == 5

    def test_threshold_is_inclusive(self):
        assert confusion([0.5], [1], 0.5).tp == 1


class TestOperatingSummary:
    def test_coverage_and_false_positive_share(self):
        summary = operating_summary([0.9, 0.8, 0.7, 0.4], [1, 1, 0, 1], 0.8)
        assert summary.threshold == 0.8
        assert summary.precision == 1.0
        assert summary.recall == pytest.approx(2 / 3)
        assert summary.coverage == 0.5
        assert summary.fp_share == 0.0

    def test_lower_target_admits_false_positives(self):
        summary = operating_summary([0.9, 0.8, 0.7, 0.4], [1, 1, 0, 1], 0.75)
        assert summary.recall == 1.0
        assert summary.coverage == 1.0
        assert summary.fp_share == 0.25

    def test_unreachable_target(self):
        summary = operating_summary([0.6, 0.5], [0, 1], 0.9)
        assert summary.threshold is None
        assert (summary.recall, summary.coverage, summary.fp_share) == (0.0, 0.0, 0.0)


class TestRegressionMetrics:
    def test_identical(self):
        x = [0.1, 0.5, 0.9]
        assert mae(x, x) == 0.0
        assert rmse(x, x) == 0.0
        assert pearson(x, x) == pytest.approx(1.0)

    def test_negated(self):
        x = np.array([0.1, 0.5, 0.9, 0.2])
        assert pearson(-x, x) == pytest.approx(-1.0)

    def test_hand_values(self):
        assert mae([0.2, 0.4], [0.0, 0.4]) == pytest.approx(0.1)
        assert rmse([0.2, 0.4], [0.0, 0.4]) == pytest.approx(0.141421, abs=1e-6)

    def test_constant_series(self):
        with pytest.raises(DegenerateVariance):
            pearson([0.3, 0.3, 0.3], [0.1, 0.2, 0.3])

    def test_pearson_needs_two_values(self):
        with pytest.raises(ShapeError):
            pearson([0.1], [0.2])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            mae([0.1, 0.2], [0.1])


class TestRegressionThresholdSweep:
    def test_grid(self):
        taus = sweep_thresholds()
        assert len(taus) == 51
        assert taus[0] == 0.0 and taus[-1] == 0.5
        assert taus[17] == 0.17

    def test_perfect_regressor(self):
        hters = [0.0, 0.2, 0.0, 0.7, 0.05]
        labels = [1, 0, 1, 0, 0]
        sweep = regression_threshold_sweep(hters, labels)
        first = sweep.curve.points[0]
        assert first.threshold == 0.0
        assert first.precision == 1.0
        assert first.recall == 1.0

    def test_constant_zero_predictor(self):
        labels = [1, 0, 0, 1, 0]
        sweep = regression_threshold_sweep([0.0] * 5, labels)
        assert all(p.precision == pytest.approx(0.4) for p in sweep.curve.points)
        assert sweep.max_precision == pytest.approx(0.4)

    def test_max_precision_matches_brute_force(self):
        rng = np.random.default_rng(5)
        hters = np.where(rng.random(200) < 0.2, 0.0, rng.uniform(0.0, 1.0, 200))
        labels = (hters == 0.0).astype(int)
        preds = np.clip(hters + rng.normal(0.0, 0.15, 200), 0.0, None)
        sweep = regression_threshold_sweep(preds, labels)
        best = 0.0
        for k in range(51):
            chosen = labels[preds <= k / 100]
            if chosen.size:
                best = max(best, chosen.sum() / chosen.size)
        assert sweep.max_precision == pytest.approx(best)

    def test_consistent_with_negated_scores(self):
        rng = np.random.default_rng(6)
        preds = rng.uniform(0.0, 0.6, 60)
        labels = (rng.random(60) < 0.3).astype(int)
        labels[0] = 1
        for point in regression_threshold_sweep(preds, labels).curve.points:
            counts = confusion(-preds, labels, -point.threshold)
            assert counts.tp + counts.fp == point.predicted_positive
            assert counts.tp == point.true_positive

    def test_unreached_precision_gives_zero(self):
        sweep = regression_threshold_sweep([0.0, 0.0, 0.3, 0.3], [1, 0, 1, 0])
        assert sweep.max_precision == 0.5
        assert sweep.recall_at_precision(0.9) == 0.0

    def test_no_positives(self):
        with pytest.raises(NoPositives):
            regression_threshold_sweep([0.1, 0.2], [0, 0])

    def test_bad_interval(self):
        with pytest.raises(ConfigError):
            regression_threshold_sweep([0.1], [1], low=0.5, high=0.0)
