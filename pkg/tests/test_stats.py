"""Tests for the rank-based comparison machinery.

The exact signed-rank p-value is checked against full enumeration of all
sign assignments (which also covers tied ranks), and both tests are
cross-checked against their scipy counterparts where those apply.
"""

import itertools
import json

import numpy as np
import pytest
from scipy import stats as scipy_stats

from orduq.errors import DegenerateComputationError
from orduq.stats import (
    ScoreMatrix,
    compare_treatments,
    friedman_test,
    holm_adjust,
    wilcoxon_signed_rank,
)


def _exact_p_by_enumeration(diffs):
    """Two-sided signed-rank p over all 2^n sign assignments.

    Works in the doubled-rank integer domain so tied (half-integer)
    average ranks compare exactly.
    """
    from scipy.stats import rankdata

    ranks2 = np.rint(rankdata(np.abs(diffs)) * 2.0).astype(int)
    total2 = int(ranks2.sum())
    w_plus2 = int(ranks2[diffs > 0].sum())
    w_min2 = min(w_plus2, total2 - w_plus2)
    hits = 0
    n = len(ranks2)
    for signs in itertools.product((0, 1), repeat=n):
        w2 = sum(r for r, s in zip(ranks2, signs) if s)
        if w2 <= w_min2 or w2 >= total2 - w_min2:
            hits += 1
    return min(1.0, hits / 2.0 ** n)


class TestFriedman:
    def test_dominant_column_ranks(self):
        result = friedman_test([[3.0, 2.0, 1.0], [3.0, 2.0, 1.0]])
        np.testing.assert_allclose(result.avg_ranks, (1.0, 2.0, 3.0))
        assert result.statistic == pytest.approx(4.0, abs=1e-12)

    def test_fully_tied_matrix_is_uninformative(self):
        result = friedman_test(np.ones((5, 4)))
        assert result.statistic == 0.0
        assert result.p_value == 1.0
        np.testing.assert_allclose(result.avg_ranks, 2.5)

    def test_higher_score_gets_rank_one(self):
        result = friedman_test([[0.9, 0.1], [0.8, 0.2], [0.7, 0.6]])
        assert result.avg_ranks[0] == 1.0 and result.avg_ranks[1] == 2.0

    def test_matches_scipy_with_ties(self):
        rng = np.random.default_rng(61)
        compared = 0
        for _ in range(200):
            n = int(rng.integers(3, 12))
            t = int(rng.integers(3, 7))
            values = np.round(rng.normal(size=(n, t)), 1)
            mine = friedman_test(values)
            if mine.statistic == 0.0 and mine.p_value == 1.0:
                continue  # scipy rejects fully tied inputs
            reference = scipy_stats.friedmanchisquare(*[values[:, j] for j in range(t)])
            assert mine.statistic == pytest.approx(reference.statistic, abs=1e-9)
            assert mine.p_value == pytest.approx(reference.pvalue, abs=1e-9)
            compared += 1
        assert compared > 150

    def test_validation(self):
        with pytest.raises(ValueError):
            friedman_test(np.ones(5))
        with pytest.raises(ValueError):
            friedman_test([[1.0, 2.0]])
        with pytest.raises(ValueError):
            friedman_test([[1.0, np.nan], [2.0, 3.0]])


class TestWilcoxon:
    def test_all_positive_differences(self):
        a = np.array([2.0, 3.0, 4.0, 5.0, 6.0])
        b = np.array([1.0, 1.0, 1.0, 1.0, 1.0])
        result = wilcoxon_signed_rank(a, b)
        assert result.exact and result.n_used == 5
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(2.0 / 32.0, abs=1e-12)

    def test_identical_samples(self):
        a = np.array([1.0, 2.0, 3.0])
        result = wilcoxon_signed_rank(a, a)
        assert result.p_value == 1.0 and result.n_used == 0

    def test_too_few_nonzero_differences(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        b = a + np.array([0.0, 0.0, 0.5, 0.0, -0.5, 0.1])
        with pytest.raises(DegenerateComputationError):
            wilcoxon_signed_rank(a, b)

    def test_exact_matches_enumeration(self):
        rng = np.random.default_rng(67)
        for _ in range(100):
            n = int(rng.integers(5, 11))
            diffs = np.round(rng.normal(size=n), 1)  # rounding produces ties
            diffs = diffs[diffs != 0.0]
            if diffs.size < 5:
                continue
            result = wilcoxon_signed_rank(diffs, np.zeros_like(diffs), method="exact")
            assert result.p_value == pytest.approx(_exact_p_by_enumeration(diffs), abs=1e-12)

    def test_exact_matches_scipy_without_ties(self):
        rng = np.random.default_rng(71)
        for _ in range(100):
            n = int(rng.integers(6, 12))
            a = rng.normal(size=n)
            b = rng.normal(size=n)
            mine = wilcoxon_signed_rank(a, b, method="exact")
            reference = scipy_stats.wilcoxon(a, b, alternative="two-sided", method="exact")
            assert mine.p_value == pytest.approx(reference.pvalue, abs=1e-12)

    def test_normal_matches_scipy(self):
        rng = np.random.default_rng(73)
        for _ in range(100):
            n = int(rng.integers(15, 40))
            a = np.round(rng.normal(size=n), 1)
            b = np.round(rng.normal(size=n), 1)
            mask = (a - b) != 0.0
            if mask.sum() < 5:
                continue
            mine = wilcoxon_signed_rank(a, b, method="normal")
            reference = scipy_stats.wilcoxon(
                a[mask], b[mask], alternative="two-sided", method="approx", correction=True
            )
            assert mine.p_value == pytest.approx(reference.pvalue, abs=1e-9)

    def test_auto_switches_branches_at_twelve(self):
        rng = np.random.default_rng(79)
        small = wilcoxon_signed_rank(rng.normal(size=12), rng.normal(size=12))
        large = wilcoxon_signed_rank(rng.normal(size=13), rng.normal(size=13))
        assert small.exact and not large.exact

    def test_symmetric_in_argument_order(self):
        rng = np.random.default_rng(83)
        a = rng.normal(size=9)
        b = rng.normal(size=9)
        assert wilcoxon_signed_rank(a, b).p_value == pytest.approx(
            wilcoxon_signed_rank(b, a).p_value, abs=1e-12
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([1.0, np.inf], [0.0, 0.0])
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([1.0, 2.0], [0.0, 0.0], method="bootstrap")


class TestHolm:
    def test_step_down_example(self):
        np.testing.assert_allclose(
            holm_adjust((0.01, 0.04, 0.03)), (0.03, 0.06, 0.06), atol=1e-12
        )

    def test_single_p_unchanged(self):
        np.testing.assert_allclose(holm_adjust((0.2,)), (0.2,))

    def test_capped_at_one(self):
        assert holm_adjust((0.9, 0.8)).max() == 1.0

    def test_monotone_in_the_sorted_order(self):
        rng = np.random.default_rng(89)
        for _ in range(100):
            p = rng.random(int(rng.integers(2, 12)))
            adjusted = holm_adjust(p)
            order = np.argsort(p, kind="stable")
            assert np.all(np.diff(adjusted[order]) >= -1e-15)
            assert np.all(adjusted >= p - 1e-15)
            assert np.all(adjusted <= 1.0)

    def test_matches_stepwise_definition(self):
        rng = np.random.default_rng(97)
        for _ in range(100):
            p = list(rng.random(int(rng.integers(1, 10))))
            m = len(p)
            order = sorted(range(m), key=lambda i: p[i])
            expected = [0.0] * m
            running = 0.0
            for rank, idx in enumerate(order):
                running = max(running, min(1.0, (m - rank) * p[idx]))
                expected[idx] = running
            np.testing.assert_allclose(holm_adjust(p), expected, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            holm_adjust(())
        with pytest.raises(ValueError):
            holm_adjust((0.5, 1.5))


class TestScoreMatrix:
    def test_shape_and_label_checks(self):
        with pytest.raises(ValueError):
            ScoreMatrix(np.ones((2, 3)), ("a", "b"), ("x", "y"))
        with pytest.raises(ValueError):
            ScoreMatrix(np.ones((2, 2)), ("a", "a"), ("x", "y"))
        with pytest.raises(ValueError):
            ScoreMatrix(np.ones((2, 2)), ("a", "b"), ("x", "x"))
        with pytest.raises(ValueError):
            ScoreMatrix(np.ones(4), ("a",), ("x", "y", "z", "w"))


class TestCompareTreatments:
    def _matrix(self, values, cols):
        values = np.asarray(values, dtype=np.float64)
        rows = tuple(f"d{i}" for i in range(values.shape[0]))
        return ScoreMatrix(values, rows, cols)

    def test_uninformative_matrix_groups_everything(self):
        report = compare_treatments(self._matrix(np.ones((6, 3)), ("a", "b", "c")))
        assert not report.pairwise_run
        assert report.friedman_p == 1.0
        assert report.groups == (("a", "b", "c"),)
        assert report.pairwise_raw == {}

    def test_clear_separation_leaves_no_groups(self):
        rng = np.random.default_rng(101)
        base = rng.normal(size=(12, 1))
        values = np.hstack([base + 2.0, base, base - 2.0])
        values += rng.normal(scale=0.01, size=values.shape)
        report = compare_treatments(self._matrix(values, ("hi", "mid", "lo")))
        assert report.pairwise_run
        assert report.friedman_p < 0.05
        assert report.groups == ()
        assert report.avg_ranks["hi"] == pytest.approx(1.0)
        assert report.avg_ranks["lo"] == pytest.approx(3.0)

    def test_partial_separation_groups_the_close_pair(self):
        rng = np.random.default_rng(103)
        base = rng.normal(size=(14, 1))
        close_a = base + rng.normal(scale=0.05, size=base.shape)
        close_b = base + rng.normal(scale=0.05, size=base.shape)
        far = base - 3.0
        report = compare_treatments(
            self._matrix(np.hstack([close_a, close_b, far]), ("a", "b", "far"))
        )
        assert report.pairwise_run
        assert report.pairwise_adjusted[("a", "far")] < 0.05
        assert report.pairwise_adjusted[("b", "far")] < 0.05
        assert report.pairwise_adjusted[("a", "b")] > 0.05
        # the sole group is the close pair, listed in rank order
        assert report.groups == (("b", "a"),)

    def test_adjusted_never_below_raw(self):
        rng = np.random.default_rng(107)
        values = rng.normal(size=(10, 4))
        report = compare_treatments(self._matrix(values, ("a", "b", "c", "d")), alpha=0.9)
        if report.pairwise_run:
            for pair, raw in report.pairwise_raw.items():
                assert report.pairwise_adjusted[pair] >= raw - 1e-15

    def test_report_serializes(self):
        report = compare_treatments(self._matrix(np.ones((4, 2)), ("a", "b")))
        payload = json.loads(report.to_json())
        assert set(payload) == {
            "alpha", "avg_ranks", "friedman", "pairwise_run", "pairwise", "groups",
        }
        assert payload["pairwise_run"] is False
        assert payload["groups"] == [["a", "b"]]

    def test_alpha_validation(self):
        matrix = self._matrix(np.ones((3, 2)), ("a", "b"))
        with pytest.raises(ValueError):
            compare_treatments(matrix, alpha=0.0)
        with pytest.raises(ValueError):
            compare_treatments(matrix, alpha=1.0)
