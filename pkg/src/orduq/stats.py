"""Nonparametric comparison of measures across datasets.

Rows of the score matrix are datasets (or any blocking unit), columns are
the treatments being compared; higher scores are better, so the best
treatment in a row receives rank 1.  The omnibus Friedman test (with tie
correction) gates pairwise two-sided Wilcoxon signed-rank tests, whose
p-values are then Holm-adjusted.  Treatments whose adjusted p stays above
alpha are grouped as statistically indistinguishable, which is what a
critical-difference style rendering consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import chi2, norm, rankdata

from .errors import DegenerateComputationError

__all__ = [
    "FriedmanResult",
    "WilcoxonResult",
    "ScoreMatrix",
    "TestReport",
    "friedman_test",
    "wilcoxon_signed_rank",
    "holm_adjust",
    "compare_treatments",
]

WILCOXON_EXACT_LIMIT = 12


def _rank_rows(values: np.ndarray) -> np.ndarray:
    """Within-row ranks, 1 = highest score, ties averaged."""
    return np.apply_along_axis(lambda row: rankdata(-row), 1, values)


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    p_value: float
    avg_ranks: np.ndarray = field(repr=False)


def friedman_test(values: np.ndarray | Sequence[Sequence[float]]) -> FriedmanResult:
    """Tie-corrected Friedman test over an N x T score matrix.

    Returns the chi-square statistic (T-1 degrees of freedom), its p-value
    and the column-wise average ranks.  A matrix whose rows are all fully
    tied carries no ranking information: statistic 0, p-value 1.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-d score matrix, got shape {values.shape}")
    n, t = values.shape
    if n < 2 or t < 2:
        raise ValueError(f"need at least 2 rows and 2 columns, got {n}x{t}")
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")

    ranks = _rank_rows(values)
    avg_ranks = ranks.mean(axis=0)

    ties = 0.0
    for row in ranks:
        _, counts = np.unique(row, return_counts=True)
        ties += float((counts.astype(np.float64) ** 3 - counts).sum())
    correction = 1.0 - ties / (n * t * (t * t - 1.0))
    if correction <= 0.0:
        return FriedmanResult(0.0, 1.0, avg_ranks)

    rank_sums = ranks.sum(axis=0)
    statistic = (12.0 / (n * t * (t + 1.0)) * float((rank_sums ** 2).sum())
                 - 3.0 * n * (t + 1.0)) / correction
    statistic = max(statistic, 0.0)
    p_value = float(chi2.sf(statistic, t - 1))
    return FriedmanResult(float(statistic), p_value, avg_ranks)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min of the signed rank sums
    p_value: float
    n_used: int       # pairs left after dropping zero differences
    exact: bool


def _signed_ranks(diffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ranks = rankdata(np.abs(diffs))
    return ranks, np.sign(diffs)


def _exact_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    """Exact tail probability over all 2^n sign assignments.

    Average ranks are multiples of 1/2, so doubling makes them integers
    and the distribution of 2*W+ is a subset-sum polynomial.
    """
    ranks2 = np.rint(ranks * 2.0).astype(np.int64)
    total2 = int(ranks2.sum())
    counts = np.zeros(total2 + 1, dtype=np.float64)
    counts[0] = 1.0
    for r2 in ranks2:
        counts[r2:] += counts[: counts.size - r2].copy()
    counts /= counts.sum()
    w2 = int(round(2.0 * w_plus))
    w_min2 = min(w2, total2 - w2)
    lower = float(counts[: w_min2 + 1].sum())
    upper = float(counts[total2 - w_min2:].sum())
    return min(1.0, lower + upper)


def _normal_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float((counts.astype(np.float64) ** 3 - counts).sum()) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if var <= 0.0:
        return 1.0
    # Continuity correction pulls the statistic half a step toward the mean.
    z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
    return min(1.0, 2.0 * float(norm.sf(z)))


def wilcoxon_signed_rank(
    a: Sequence[float], b: Sequence[float], method: str = "auto"
) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired scores.

    Zero differences are dropped.  With 12 or fewer remaining pairs the
    p-value is exact (full sign-flip enumeration, average ranks for ties);
    beyond that a normal approximation with continuity and tie correction
    is used.  ``method`` can force either branch.  Identical inputs give
    p = 1; otherwise at least 5 nonzero differences are required.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be matching 1-d vectors")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("scores must be finite")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"method must be auto, exact or normal, got {method!r}")

    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, True)
    if n < 5:
        raise DegenerateComputationError(
            f"only {n} nonzero differences; need at least 5 for a meaningful test"
        )

    ranks, signs = _signed_ranks(diffs)
    w_plus = float(ranks[signs > 0].sum())
    w_minus = float(ranks[signs < 0].sum())
    statistic = min(w_plus, w_minus)

    exact = method == "exact" or (method == "auto" and n <= WILCOXON_EXACT_LIMIT)
    if exact:
        p_value = _exact_two_sided_p(ranks, w_plus)
    else:
        p_value = _normal_two_sided_p(ranks, w_plus)
    return WilcoxonResult(statistic, p_value, n, exact)


def holm_adjust(p_values: Sequence[float]) -> np.ndarray:
    """Holm step-down adjustment, monotone and capped at 1."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a nonempty 1-d vector of p-values")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(p[order] * (m - np.arange(m)), 1.0)
    adjusted_sorted = np.maximum.accumulate(scaled)
    adjusted = np.empty_like(p)
    adjusted[order] = adjusted_sorted
    return adjusted


@dataclass(frozen=True)
class ScoreMatrix:
    """Named N x T score matrix, higher is better."""

    values: np.ndarray = field(repr=False)
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        if values.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got shape {values.shape}")
        if values.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError("labels do not match the matrix shape")
        if len(set(self.row_labels)) != len(self.row_labels):
            raise ValueError("row labels must be unique")
        if len(set(self.col_labels)) != len(self.col_labels):
            raise ValueError("column labels must be unique")


@dataclass(frozen=True)
class TestReport:
    """Omnibus and pairwise comparison results for one score matrix."""

    alpha: float
    col_labels: tuple[str, ...]
    friedman_statistic: float
    friedman_p: float
    avg_ranks: dict[str, float]
    pairwise_run: bool
    pairwise_raw: dict[tuple[str, str], float]
    pairwise_adjusted: dict[tuple[str, str], float]
    groups: tuple[tuple[str, ...], ...]

    def to_dict(self) -> dict:
        pairs = [
            {
                "a": a,
                "b": b,
                "p": self.pairwise_raw[(a, b)],
                "p_adjusted": self.pairwise_adjusted[(a, b)],
            }
            for (a, b) in sorted(self.pairwise_raw)
        ]
        return {
            "alpha": self.alpha,
            "avg_ranks": {k: self.avg_ranks[k] for k in self.col_labels},
            "friedman": {"statistic": self.friedman_statistic, "p": self.friedman_p},
            "pairwise_run": self.pairwise_run,
            "pairwise": pairs,
            "groups": [list(g) for g in self.groups],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _nonsignificant_groups(
    ordered: list[str], nonsig: set[tuple[str, str]]
) -> tuple[tuple[str, ...], ...]:
    """Maximal rank-contiguous runs whose pairs are all non-significant."""
    groups: list[tuple[str, ...]] = []
    t = len(ordered)
    for i in range(t):
        j = i
        while j + 1 < t and all(
            tuple(sorted((ordered[x], ordered[j + 1]))) in nonsig
            for x in range(i, j + 1)
        ):
            j += 1
        if j > i:
            groups.append(tuple(ordered[i : j + 1]))
    # Drop runs fully contained in an earlier, longer run.
    maximal = [
        g for g in groups
        if not any(g != h and set(g) <= set(h) for h in groups)
    ]
    return tuple(maximal)


def compare_treatments(scores: ScoreMatrix, alpha: float = 0.05) -> TestReport:
    """Friedman omnibus test, then (if significant) Holm-adjusted pairwise
    Wilcoxon signed-rank tests between all treatment columns."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    omnibus = friedman_test(scores.values)
    labels = scores.col_labels
    avg_ranks = {label: float(r) for label, r in zip(labels, omnibus.avg_ranks)}

    pairwise_raw: dict[tuple[str, str], float] = {}
    pairwise_adjusted: dict[tuple[str, str], float] = {}
    pairwise_run = omnibus.p_value <= alpha
    if pairwise_run:
        pairs = [
            (labels[i], labels[j])
            for i in range(len(labels))
            for j in range(i + 1, len(labels))
        ]
        raw = []
        for a, b in pairs:
            ia, ib = labels.index(a), labels.index(b)
            raw.append(
                wilcoxon_signed_rank(scores.values[:, ia], scores.values[:, ib]).p_value
            )
        adjusted = holm_adjust(raw)
        pairwise_raw = {pair: float(p) for pair, p in zip(pairs, raw)}
        pairwise_adjusted = {pair: float(p) for pair, p in zip(pairs, adjusted)}
        nonsig = {
            tuple(sorted(pair)) for pair, p in pairwise_adjusted.items() if p > alpha
        }
    else:
        # Without omnibus significance every pair counts as indistinguishable.
        nonsig = {
            tuple(sorted((labels[i], labels[j])))
            for i in range(len(labels))
            for j in range(i + 1, len(labels))
        }

    ordered = sorted(labels, key=lambda c: (avg_ranks[c], labels.index(c)))
    groups = _nonsignificant_groups(ordered, nonsig)
    return TestReport(
        alpha=float(alpha),
        col_labels=labels,
        friedman_statistic=omnibus.statistic,
        friedman_p=omnibus.p_value,
        avg_ranks=avg_ranks,
        pairwise_run=pairwise_run,
        pairwise_raw=pairwise_raw,
        pairwise_adjusted=pairwise_adjusted,
        groups=groups,
    )
