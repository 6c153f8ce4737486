"""Tests for decisions, error metrics, rejection curves, PRR and AUC.

The rejection machinery is checked against exhaustive enumeration of
small 0/1 error vectors, the AUC against O(N^2) pair counting, and the
quadratic kappa against a separately written confusion-matrix form.
"""

import itertools
import math

import numpy as np
import pytest

from orduq.errors import DegenerateComputationError
from orduq.evaluation import (
    CURVE_METRICS,
    PredictionRecord,
    attach_uncertainty,
    auc_roc,
    decide,
    emd_loss,
    error_contributions,
    point_metrics,
    prob_metrics,
    prr,
    prr_from_arrays,
    rejection_curve,
    rejection_curve_from_arrays,
)
from orduq.measures import Measure, ProbabilityVector


def _records_from_means(means, labels):
    """Single-member records whose mean equals the given distribution."""
    return [
        PredictionRecord.from_members(i, int(y), [list(p)])
        for i, (p, y) in enumerate(zip(means, labels))
    ]


def _random_records(rng, n, k_count, m_count=3):
    records = []
    for i in range(n):
        raw = rng.gamma(0.7, 1.0, size=(m_count, k_count))
        matrix = raw / raw.sum(axis=1, keepdims=True)
        records.append(
            PredictionRecord.from_members(i, int(rng.integers(1, k_count + 1)), matrix)
        )
    return records


def _auc_pair_counting(scores, labels):
    """AUC as the fraction of positive/negative pairs ranked correctly,
    ties counting one half."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def _qwk_confusion(preds, labels, k_count):
    """Quadratic-weighted agreement via explicit confusion-matrix loops."""
    n = len(labels)
    observed = [[0.0] * k_count for _ in range(k_count)]
    for p, y in zip(preds, labels):
        observed[p - 1][y - 1] += 1.0
    row = [sum(observed[i]) for i in range(k_count)]
    col = [sum(observed[i][j] for i in range(k_count)) for j in range(k_count)]
    num = den = 0.0
    for i in range(k_count):
        for j in range(k_count):
            w = (i - j) ** 2 / (k_count - 1) ** 2
            num += w * observed[i][j]
            den += w * row[i] * col[j] / n
    return 1.0 - num / den


class TestDecide:
    def test_extreme_bimodal_under_each_rule(self):
        p = ProbabilityVector((0.5, 0.0, 0.5))
        assert decide(p, "argmax") == 1  # tie resolves to the lower class
        assert decide(p, "l1") == 1      # lower median
        assert decide(p, "l2") == 2      # mean of the scale

    def test_skewed_distribution_under_each_rule(self):
        p = ProbabilityVector((0.2, 0.3, 0.5))
        assert decide(p, "argmax") == 3
        assert decide(p, "l1") == 2
        assert decide(p, "l2") == 2      # mean 2.3 rounds down
        assert decide(p, "top2") == (3, 2)

    def test_rounding_is_half_up(self):
        assert decide(ProbabilityVector((0.5, 0.5)), "l2") == 2  # mean 1.5

    def test_unknown_rule_rejected(self):
        with pytest.raises(ValueError):
            decide(ProbabilityVector((0.5, 0.5)), "mode")


class TestPredictionRecord:
    def test_from_members_accepts_raw_rows(self):
        r = PredictionRecord.from_members(0, 2, [[0.2, 0.8], [0.6, 0.4]])
        np.testing.assert_allclose(r.mean.array, (0.4, 0.6), atol=1e-12)
        assert r.k_count == 2

    def test_label_outside_scale_rejected(self):
        with pytest.raises(ValueError):
            PredictionRecord.from_members(0, 3, [[0.5, 0.5]])
        with pytest.raises(ValueError):
            PredictionRecord.from_members(0, 0, [[0.5, 0.5]])

    def test_attach_uncertainty_fills_all_requested(self):
        rng = np.random.default_rng(2)
        records = _random_records(rng, 10, 4)
        attach_uncertainty(records, ("ent", "ord-var"))
        for r in records:
            assert set(r.uncertainty) == {Measure.ENTROPY, Measure.ORDINAL_VARIANCE}

    def test_attach_handles_mixed_member_counts(self):
        records = [
            PredictionRecord.from_members(0, 1, [[0.7, 0.3]]),
            PredictionRecord.from_members(1, 2, [[0.2, 0.8], [0.4, 0.6], [0.5, 0.5]]),
        ]
        attach_uncertainty(records, ("ent",))
        from orduq.measures import compute_uncertainty

        for r in records:
            expected = compute_uncertainty(r.members, "ent")
            got = r.uncertainty[Measure.ENTROPY]
            assert got.tu == pytest.approx(expected.tu, abs=1e-12)


class TestPointMetrics:
    def test_one_wrong_out_of_three(self):
        means = [(1, 0, 0), (0, 0, 1), (0, 0, 1)]
        records = _records_from_means(means, (1, 2, 3))
        pm = point_metrics(records)
        assert pm.mcr == pytest.approx(1 / 3, abs=1e-12)
        assert pm.mae == pytest.approx(1 / 3, abs=1e-12)
        assert pm.mse == pytest.approx(1 / 3, abs=1e-12)
        assert pm.one_off == pytest.approx(1.0, abs=1e-12)

    def test_perfect_predictions(self):
        means = [(1, 0), (0, 1), (1, 0)]
        pm = point_metrics(_records_from_means(means, (1, 2, 1)))
        assert pm.mcr == 0.0 and pm.mae == 0.0 and pm.qwk == pytest.approx(1.0)

    def test_kappa_matches_confusion_form(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            k_count = int(rng.integers(2, 6))
            n = int(rng.integers(5, 30))
            labels = rng.integers(1, k_count + 1, size=n)
            means = np.eye(k_count)[rng.integers(0, k_count, size=n)]
            # skip draws where chance agreement is undefined
            preds = means.argmax(axis=1) + 1
            if len(set(preds)) == 1 and set(preds) == set(labels):
                continue
            pm = point_metrics(_records_from_means(means, labels))
            assert not pm.qwk_degenerate
            assert pm.qwk == pytest.approx(
                _qwk_confusion(list(preds), list(labels), k_count), abs=1e-9
            )

    def test_kappa_degenerate_when_single_shared_class(self):
        means = [(0, 1, 0)] * 4
        pm = point_metrics(_records_from_means(means, (2, 2, 2, 2)))
        assert pm.qwk == 0.0 and pm.qwk_degenerate

    def test_top2_one_off_mode(self):
        means = [(0.1, 0.4, 0.5)]
        pm = point_metrics(_records_from_means(means, (2,)), one_off_mode="top2")
        assert pm.one_off == 1.0
        pm = point_metrics(_records_from_means(means, (1,)), one_off_mode="top2")
        assert pm.one_off == 0.0

    def test_empty_and_mixed_scale_rejected(self):
        with pytest.raises(ValueError):
            point_metrics([])
        mixed = [
            PredictionRecord.from_members(0, 1, [[0.5, 0.5]]),
            PredictionRecord.from_members(1, 1, [[0.5, 0.3, 0.2]]),
        ]
        with pytest.raises(ValueError):
            point_metrics(mixed)
        with pytest.raises(ValueError):
            point_metrics(_records_from_means([(1, 0)], (1,)), one_off_mode="top3")


class TestProbMetrics:
    def test_fair_coin_scores(self):
        pm = prob_metrics(_records_from_means([(0.5, 0.5)], (1,)))
        assert pm.nll == pytest.approx(math.log(2.0), abs=1e-12)
        assert pm.brier == pytest.approx(0.5, abs=1e-12)
        assert pm.rps == pytest.approx(0.25, abs=1e-12)

    def test_nll_floor_flagged(self):
        pm = prob_metrics(_records_from_means([(1.0, 0.0)], (2,)))
        assert pm.nll_clamped
        assert pm.nll == pytest.approx(-math.log(1e-12), abs=1e-9)

    def test_calibration_error_two_bins(self):
        means = [(0.9, 0.1), (0.6, 0.4)]
        pm = prob_metrics(_records_from_means(means, (1, 2)))
        # bin 9: |1 - 0.9| weighted 1/2; bin 6: |0 - 0.6| weighted 1/2
        assert pm.ece == pytest.approx(0.35, abs=1e-12)

    def test_distance_to_label_frozen_values(self):
        assert emd_loss((0.5, 0.0, 0.5), 2) == pytest.approx(0.5, abs=1e-12)
        assert emd_loss((1.0, 0.0, 0.0), 3) == pytest.approx(2.0, abs=1e-12)
        assert emd_loss((0.0, 0.0, 1.0), 3) == 0.0

    def test_distance_rejects_bad_label(self):
        with pytest.raises(ValueError):
            emd_loss((0.5, 0.5), 3)

    def test_rps_is_mean_distance_to_label(self):
        rng = np.random.default_rng(19)
        records = _random_records(rng, 200, 5)
        pm = prob_metrics(records)
        mean_emd = np.mean([emd_loss(r.mean, r.true_label) for r in records])
        assert pm.rps == pytest.approx(float(mean_emd), abs=1e-12)


class TestErrorContributions:
    def test_zero_one_for_misclassification(self):
        means = [(1, 0, 0), (0, 0, 1), (0, 0, 1)]
        errs = error_contributions(_records_from_means(means, (1, 2, 3)), "mcr")
        np.testing.assert_allclose(errs, (0.0, 1.0, 0.0))

    def test_absolute_steps_for_mae(self):
        means = [(1, 0, 0), (1, 0, 0)]
        errs = error_contributions(_records_from_means(means, (3, 1)), "mae")
        np.testing.assert_allclose(errs, (2.0, 0.0))

    def test_squared_steps_for_mse(self):
        means = [(1, 0, 0, 0)]
        errs = error_contributions(_records_from_means(means, (4,)), "mse")
        np.testing.assert_allclose(errs, (9.0,))

    def test_mean_contribution_matches_point_metric(self):
        rng = np.random.default_rng(23)
        records = _random_records(rng, 50, 4)
        pm = point_metrics(records)
        for metric, value in (("mcr", pm.mcr), ("mae", pm.mae), ("mse", pm.mse)):
            errs = error_contributions(records, metric)
            assert float(errs.mean()) == pytest.approx(value, abs=1e-12)

    def test_unknown_metric_rejected(self):
        with pytest.raises(ValueError):
            error_contributions(_records_from_means([(1, 0)], (1,)), "qwk")


class TestRejectionCurves:
    ERRORS = np.array([1.0, 0.0, 1.0, 0.0])
    SCORES = np.array([0.9, 0.1, 0.8, 0.2])

    def test_uncertainty_ordering_frozen_values(self):
        curve = rejection_curve_from_arrays(self.ERRORS, self.SCORES)
        np.testing.assert_allclose(curve.fractions, (0.0, 0.25, 0.5, 0.75, 1.0))
        np.testing.assert_allclose(curve.values, (0.5, 0.25, 0.0, 0.0, 0.0), atol=1e-12)

    def test_retained_only_accounting(self):
        curve = rejection_curve_from_arrays(
            self.ERRORS, self.SCORES, retained_only=True
        )
        np.testing.assert_allclose(curve.values, (0.5, 1 / 3, 0.0, 0.0, 0.0), atol=1e-12)

    def test_oracle_ordering_rejects_errors_first(self):
        curve = rejection_curve_from_arrays(self.ERRORS, None, ordering="oracle")
        np.testing.assert_allclose(curve.values, (0.5, 0.25, 0.0, 0.0, 0.0), atol=1e-12)

    def test_random_baseline_is_linear(self):
        curve = rejection_curve_from_arrays(self.ERRORS, None, ordering="random-analytic")
        np.testing.assert_allclose(curve.values, 0.5 * (1.0 - curve.fractions), atol=1e-12)

    def test_random_baseline_retained_only_is_flat(self):
        curve = rejection_curve_from_arrays(
            self.ERRORS, None, ordering="random-analytic", retained_only=True
        )
        np.testing.assert_allclose(curve.values, (0.5, 0.5, 0.5, 0.5, 0.0), atol=1e-12)

    def test_ties_keep_original_order(self):
        # equal scores: the earlier instance is rejected first
        errors = np.array([0.0, 1.0, 0.0])
        curve = rejection_curve_from_arrays(errors, np.array([0.7, 0.7, 0.1]))
        np.testing.assert_allclose(curve.values, (1 / 3, 1 / 3, 0.0, 0.0), atol=1e-12)

    def test_oracle_curve_is_monotone_nonincreasing(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            errors = rng.choice([0.0, 1.0, 2.0], size=int(rng.integers(2, 40)))
            if errors.max() == 0.0:
                errors[0] = 1.0
            curve = rejection_curve_from_arrays(errors, None, ordering="oracle")
            assert np.all(np.diff(curve.values) <= 1e-12)
            assert curve.values[0] == pytest.approx(float(errors.mean()), abs=1e-12)
            assert curve.values[-1] == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            rejection_curve_from_arrays(np.array([1.0]), np.array([0.5]))
        with pytest.raises(ValueError):
            rejection_curve_from_arrays(np.array([1.0, -0.5]), np.array([0.5, 0.1]))
        with pytest.raises(ValueError):
            rejection_curve_from_arrays(np.array([1.0, np.nan]), np.array([0.5, 0.1]))
        with pytest.raises(ValueError):
            rejection_curve_from_arrays(self.ERRORS, self.SCORES[:2])
        with pytest.raises(ValueError):
            rejection_curve_from_arrays(self.ERRORS, None, ordering="uncertainty")
        with pytest.raises(ValueError):
            rejection_curve_from_arrays(self.ERRORS, self.SCORES, ordering="sorted")

    def test_record_path_matches_array_path(self):
        rng = np.random.default_rng(31)
        records = _random_records(rng, 40, 4)
        attach_uncertainty(records, ("ent",))
        for metric in CURVE_METRICS:
            via_records = rejection_curve(records, metric, "uncertainty", ("ent", "tu"))
            errors = error_contributions(records, metric)
            scores = np.array([r.uncertainty[Measure.ENTROPY].tu for r in records])
            via_arrays = rejection_curve_from_arrays(errors, scores, "uncertainty", metric)
            np.testing.assert_allclose(via_records.values, via_arrays.values, atol=1e-15)

    def test_missing_triple_raises(self):
        records = _random_records(np.random.default_rng(37), 5, 3)
        with pytest.raises(KeyError):
            rejection_curve(records, "mcr", "uncertainty", ("ent", "tu"))


class TestPrr:
    def test_oracle_consistent_scores_reach_one(self):
        # every nonconstant 0/1 error vector up to length 6
        for n in range(2, 7):
            for bits in itertools.product((0.0, 1.0), repeat=n):
                errors = np.array(bits)
                if errors.min() == errors.max():
                    continue
                result = prr_from_arrays(errors, errors.copy())
                assert result.prr == pytest.approx(1.0, abs=1e-9)

    def test_anti_correlated_scores_go_negative(self):
        for n in range(2, 7):
            for bits in itertools.product((0.0, 1.0), repeat=n):
                errors = np.array(bits)
                if errors.min() == errors.max():
                    continue
                result = prr_from_arrays(errors, 1.0 - errors)
                assert result.prr < 0.0

    def test_constant_errors_are_degenerate(self):
        for value in (0.0, 1.0):
            with pytest.raises(DegenerateComputationError):
                prr_from_arrays(np.full(8, value), np.arange(8.0))

    def test_random_orderings_center_on_zero(self):
        errors = np.array([1.0] * 10 + [0.0] * 20)
        rng = np.random.default_rng(41)
        values = []
        for _ in range(1000):
            scores = rng.permutation(errors.size).astype(np.float64)
            values.append(prr_from_arrays(errors, scores).prr)
        assert abs(float(np.mean(values))) < 0.1

    def test_never_exceeds_one(self):
        rng = np.random.default_rng(43)
        for _ in range(300):
            n = int(rng.integers(3, 50))
            errors = rng.choice([0.0, 1.0, 2.0], size=n)
            if errors.min() == errors.max():
                continue
            scores = rng.normal(size=n)
            assert prr_from_arrays(errors, scores).prr <= 1.0 + 1e-9

    def test_record_wrapper_matches_array_form(self):
        rng = np.random.default_rng(47)
        records = _random_records(rng, 60, 4)
        attach_uncertainty(records, ("var",))
        result = prr(records, "mae", ("var", "eu"))
        errors = error_contributions(records, "mae")
        scores = np.array([r.uncertainty[Measure.VARIANCE].eu for r in records])
        expected = prr_from_arrays(errors, scores, "mae")
        assert result.prr == pytest.approx(expected.prr, abs=1e-12)
        assert result.ar_oracle == pytest.approx(expected.ar_oracle, abs=1e-12)


class TestAucRoc:
    def test_alternating_labels(self):
        assert auc_roc((1.0, 2.0, 3.0, 4.0), (0, 1, 0, 1)) == pytest.approx(0.75, abs=1e-12)

    def test_perfect_and_inverted_separation(self):
        assert auc_roc((0.1, 0.2, 0.8, 0.9), (0, 0, 1, 1)) == 1.0
        assert auc_roc((0.9, 0.8, 0.2, 0.1), (0, 0, 1, 1)) == 0.0

    def test_constant_scores_give_half(self):
        assert auc_roc((0.5, 0.5, 0.5, 0.5), (0, 1, 0, 1)) == pytest.approx(0.5, abs=1e-12)

    def test_matches_pair_counting(self):
        rng = np.random.default_rng(53)
        for _ in range(500):
            n = int(rng.integers(4, 30))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.normal(size=n), 1)  # coarse grid forces ties
            assert auc_roc(scores, labels) == pytest.approx(
                _auc_pair_counting(scores, labels), abs=1e-12
            )

    def test_single_class_is_degenerate(self):
        with pytest.raises(DegenerateComputationError):
            auc_roc((0.1, 0.2), (1, 1))

    def test_validation(self):
        with pytest.raises(ValueError):
            auc_roc((0.1, 0.2), (0, 2))
        with pytest.raises(ValueError):
            auc_roc((0.1, 0.2, 0.3), (0, 1))
