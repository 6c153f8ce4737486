"""Decision rules, error metrics and uncertainty-based rejection analysis.

The unit of account is a :class:`PredictionRecord`: one instance with its
true label, the per-member distributions, their mean, and any uncertainty
triples attached to it.  Point metrics pair each error measure with the
Bayes-optimal decision rule for its loss (mode for 0/1, median for
absolute error, rounded mean for squared error).  Rejection curves order
records by an uncertainty score and track how an error metric improves as
the most uncertain fraction is handed to an oracle; the prediction
rejection ratio (PRR) normalizes the gained area by what a perfect
error-aware ordering would gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateComputationError
from .measures import (
    EnsemblePrediction,
    Measure,
    ProbabilityVector,
    UncertaintyTriple,
    batch_decompose,
    posterior_mean,
)

__all__ = [
    "PredictionRecord",
    "PointMetrics",
    "ProbMetrics",
    "RejectionCurve",
    "PrrResult",
    "attach_uncertainty",
    "decide",
    "emd_loss",
    "error_contributions",
    "point_metrics",
    "prob_metrics",
    "rejection_curve",
    "rejection_curve_from_arrays",
    "prr",
    "prr_from_arrays",
    "auc_roc",
]

DECISION_RULES = ("argmax", "l1", "l2", "top2")
CURVE_METRICS = ("mcr", "mae", "mse")
ORDERINGS = ("uncertainty", "oracle", "random-analytic")

NLL_FLOOR = 1e-12


@dataclass
class PredictionRecord:
    """One instance: true label, member distributions, their mean, and any
    uncertainty triples computed for it."""

    instance_id: int
    true_label: int
    members: EnsemblePrediction
    mean: ProbabilityVector
    uncertainty: dict[Measure, UncertaintyTriple] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 1 <= self.true_label <= self.members.k_count:
            raise ValueError(
                f"true label {self.true_label} outside 1..{self.members.k_count}"
            )

    @classmethod
    def from_members(
        cls,
        instance_id: int,
        true_label: int,
        members: EnsemblePrediction | np.ndarray | Sequence[Sequence[float]],
    ) -> "PredictionRecord":
        if not isinstance(members, EnsemblePrediction):
            members = EnsemblePrediction.of(np.asarray(members, dtype=np.float64))
        return cls(
            instance_id=int(instance_id),
            true_label=int(true_label),
            members=members,
            mean=posterior_mean(members),
        )

    @property
    def k_count(self) -> int:
        return self.members.k_count


def attach_uncertainty(
    records: Sequence[PredictionRecord],
    measures: Iterable[Measure | str] = tuple(Measure),
    log_base: float = 2.0,
) -> Sequence[PredictionRecord]:
    """Compute and store uncertainty triples on each record, in place.

    Records sharing one (M, K) shape are decomposed in a single batch.
    """
    measures = [Measure.from_string(m) for m in measures]
    if not records:
        return records
    shapes = {r.members.matrix.shape for r in records}
    if len(shapes) == 1:
        stacked = np.stack([r.members.matrix for r in records])
        for measure in measures:
            tu, au, eu = batch_decompose(stacked, measure, log_base)
            for i, record in enumerate(records):
                record.uncertainty[measure] = UncertaintyTriple(
                    float(tu[i]), float(au[i]), float(eu[i]), measure
                )
    else:
        for record in records:
            for measure in measures:
                tu, au, eu = batch_decompose(record.members.matrix, measure, log_base)
                record.uncertainty[measure] = UncertaintyTriple(
                    float(tu[0]), float(au[0]), float(eu[0]), measure
                )
    return records


# ---------------------------------------------------------------------------
# Decision rules and metrics
# ---------------------------------------------------------------------------


def decide(p: ProbabilityVector, rule: str = "argmax") -> int | tuple[int, int]:
    """Turn a distribution into a class decision.

    ``argmax`` picks the mode, ``l1`` the lowest median of the integer
    encoding, ``l2`` the mean rounded half-up and clipped to the scale,
    and ``top2`` returns the two most probable classes.  All ties resolve
    toward the lowest class index.
    """
    arr = p.array
    if rule == "argmax":
        return int(np.argmax(arr)) + 1
    if rule == "l1":
        cdf = np.cumsum(arr)
        # The small slack keeps knife-edge 0.5 sums on the lower median.
        return int(np.argmax(cdf >= 0.5 - 1e-9)) + 1
    if rule == "l2":
        k = np.arange(1, p.k_count + 1, dtype=np.float64)
        mean = float((arr * k).sum())
        return int(min(max(math.floor(mean + 0.5), 1), p.k_count))
    if rule == "top2":
        order = np.argsort(-arr, kind="stable")
        return int(order[0]) + 1, int(order[1]) + 1
    raise ValueError(f"unknown decision rule {rule!r}; expected one of {DECISION_RULES}")


@dataclass(frozen=True)
class PointMetrics:
    """Hard-decision error metrics over a record set."""

    mcr: float
    mae: float
    mse: float
    qwk: float
    one_off: float
    qwk_degenerate: bool = False


@dataclass(frozen=True)
class ProbMetrics:
    """Distribution-level scores over a record set."""

    nll: float
    brier: float
    rps: float
    ece: float
    nll_clamped: bool = False


def _require_records(records: Sequence[PredictionRecord]) -> int:
    if not records:
        raise ValueError("need at least one prediction record")
    k = records[0].k_count
    if any(r.k_count != k for r in records):
        raise ValueError("records must share one class scale")
    return k


def point_metrics(
    records: Sequence[PredictionRecord], one_off_mode: str = "argmax"
) -> PointMetrics:
    """Misclassification rate, absolute and squared error, quadratic kappa
    and the one-off rate.

    ``one_off_mode`` chooses how near-hits are counted: ``"argmax"`` scores
    a hit when the modal class is within one step of the label, ``"top2"``
    when the label is among the two most probable classes.
    """
    if one_off_mode not in ("argmax", "top2"):
        raise ValueError(f"one_off_mode must be 'argmax' or 'top2', got {one_off_mode!r}")
    k_count = _require_records(records)
    labels = np.array([r.true_label for r in records])
    modal = np.array([decide(r.mean, "argmax") for r in records])
    median = np.array([decide(r.mean, "l1") for r in records])
    rounded = np.array([decide(r.mean, "l2") for r in records])

    mcr = float(np.mean(modal != labels))
    mae = float(np.mean(np.abs(median - labels)))
    mse = float(np.mean((rounded - labels) ** 2.0))

    if one_off_mode == "argmax":
        one_off = float(np.mean(np.abs(modal - labels) <= 1))
    else:
        hits = [label in decide(r.mean, "top2") for r, label in zip(records, labels)]
        one_off = float(np.mean(hits))

    qwk, degenerate = _quadratic_kappa(modal, labels, k_count)
    return PointMetrics(mcr=mcr, mae=mae, mse=mse, qwk=qwk, one_off=one_off,
                        qwk_degenerate=degenerate)


def _quadratic_kappa(preds: np.ndarray, labels: np.ndarray, k_count: int) -> tuple[float, bool]:
    n = len(labels)
    observed = np.zeros((k_count, k_count))
    np.add.at(observed, (preds - 1, labels - 1), 1.0)
    idx = np.arange(k_count, dtype=np.float64)
    weights = (idx[:, np.newaxis] - idx[np.newaxis, :]) ** 2 / (k_count - 1) ** 2
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / n
    denom = float((weights * expected).sum())
    if denom <= 0.0:
        # Both marginals sit on a single shared class; chance-corrected
        # agreement is undefined, reported as 0 with the flag set.
        return 0.0, True
    return float(1.0 - (weights * observed).sum() / denom), False


def emd_loss(p: ProbabilityVector | Sequence[float], y: int) -> float:
    """Squared earth-mover distance between a distribution and a one-hot
    label, computed on the K-1 inner steps of the cumulative functions."""
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(tuple(p))
    if not 1 <= y <= p.k_count:
        raise ValueError(f"label {y} outside 1..{p.k_count}")
    cdf_p = np.cumsum(p.array)[:-1]
    cdf_y = (np.arange(1, p.k_count) >= y).astype(np.float64)
    return float(((cdf_p - cdf_y) ** 2).sum())


def prob_metrics(records: Sequence[PredictionRecord], n_bins: int = 10) -> ProbMetrics:
    """Negative log-likelihood, Brier score, ranked probability score and
    expected calibration error of the mean distributions."""
    _require_records(records)
    means = np.stack([r.mean.array for r in records])
    labels = np.array([r.true_label for r in records])
    n, k_count = means.shape

    p_true = means[np.arange(n), labels - 1]
    clamped = bool(np.any(p_true < NLL_FLOOR))
    nll = float(np.mean(-np.log(np.maximum(p_true, NLL_FLOOR))))

    onehot = np.zeros_like(means)
    onehot[np.arange(n), labels - 1] = 1.0
    brier = float(np.mean(((means - onehot) ** 2).sum(axis=1)))

    rps = float(np.mean([emd_loss(r.mean, r.true_label) for r in records]))

    confidence = means.max(axis=1)
    correct = (np.argmax(means, axis=1) + 1 == labels).astype(np.float64)
    bins = np.minimum((confidence * n_bins).astype(int), n_bins - 1)
    ece = 0.0
    for b in range(n_bins):
        mask = bins == b
        if not mask.any():
            continue
        ece += mask.mean() * abs(correct[mask].mean() - confidence[mask].mean())

    return ProbMetrics(nll=nll, brier=brier, rps=rps, ece=float(ece), nll_clamped=clamped)


# ---------------------------------------------------------------------------
# Rejection analysis
# ---------------------------------------------------------------------------


def error_contributions(records: Sequence[PredictionRecord], metric: str) -> np.ndarray:
    """Per-instance contribution to a point metric, under that metric's
    decision rule."""
    _require_records(records)
    labels = np.array([r.true_label for r in records])
    if metric == "mcr":
        preds = np.array([decide(r.mean, "argmax") for r in records])
        return (preds != labels).astype(np.float64)
    if metric == "mae":
        preds = np.array([decide(r.mean, "l1") for r in records])
        return np.abs(preds - labels).astype(np.float64)
    if metric == "mse":
        preds = np.array([decide(r.mean, "l2") for r in records])
        return ((preds - labels) ** 2).astype(np.float64)
    raise ValueError(f"unknown curve metric {metric!r}; expected one of {CURVE_METRICS}")


@dataclass(frozen=True)
class RejectionCurve:
    """Metric value as a function of the rejected fraction.

    Fractions run over the per-instance grid 0, 1/N, ..., 1.  Rejected
    instances count as error-free (an oracle answers them), so curves end
    at 0; with ``retained_only`` accounting the value is instead the
    metric over the kept instances.
    """

    metric: str
    ordering: str
    fractions: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def _resolve_score(records: Sequence[PredictionRecord], score) -> np.ndarray:
    measure, kind = score
    measure = Measure.from_string(measure)
    values = np.empty(len(records))
    for i, record in enumerate(records):
        if measure not in record.uncertainty:
            raise KeyError(
                f"record {record.instance_id} has no {measure.value!r} triple attached; "
                "call attach_uncertainty first"
            )
        values[i] = record.uncertainty[measure][kind]
    return values


def rejection_curve_from_arrays(
    errors: np.ndarray,
    scores: np.ndarray | None = None,
    ordering: str = "uncertainty",
    metric: str = "mcr",
    retained_only: bool = False,
) -> RejectionCurve:
    """Build a rejection curve from raw per-instance error contributions.

    For ``uncertainty`` ordering, instances are rejected by descending
    ``scores`` (equal scores keep their original order).  The ``oracle``
    ordering rejects by descending error contribution, and
    ``random-analytic`` is the closed-form expectation of a uniformly
    random ordering.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.ndim != 1 or errors.size < 2:
        raise ValueError("need a 1-d vector of at least 2 error contributions")
    if not np.all(np.isfinite(errors)) or np.any(errors < 0.0):
        raise ValueError("error contributions must be finite and nonnegative")
    n = errors.size
    fractions = np.arange(n + 1, dtype=np.float64) / n
    full = float(errors.sum()) / n

    if ordering == "random-analytic":
        if retained_only:
            values = np.full(n + 1, full)
            values[n] = 0.0
        else:
            values = full * (1.0 - fractions)
        return RejectionCurve(metric, ordering, fractions, values)

    if ordering == "uncertainty":
        if scores is None:
            raise ValueError("uncertainty ordering needs a score vector")
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != errors.shape:
            raise ValueError("scores and errors must have matching length")
        order = np.argsort(-scores, kind="stable")
    elif ordering == "oracle":
        order = np.argsort(-errors, kind="stable")
    else:
        raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")

    rejected = np.concatenate(([0.0], np.cumsum(errors[order])))
    remaining = errors.sum() - rejected
    if retained_only:
        kept = n - np.arange(n + 1, dtype=np.float64)
        kept[n] = 1.0  # empty retained set: value pinned to 0 below
        values = remaining / kept
        values[n] = 0.0
    else:
        values = remaining / n
    return RejectionCurve(metric, ordering, fractions, np.maximum(values, 0.0))


def rejection_curve(
    records: Sequence[PredictionRecord],
    metric: str = "mcr",
    ordering: str = "uncertainty",
    score: tuple[Measure | str, str] | None = None,
    retained_only: bool = False,
) -> RejectionCurve:
    """Rejection curve over prediction records.

    ``score`` selects the ordering signal as a (measure, kind) pair with
    kind in {"tu", "au", "eu"}; it is only needed for the ``uncertainty``
    ordering.
    """
    errors = error_contributions(records, metric)
    scores = _resolve_score(records, score) if ordering == "uncertainty" else None
    return rejection_curve_from_arrays(errors, scores, ordering, metric, retained_only)


@dataclass(frozen=True)
class PrrResult:
    """Areas between the random baseline and the uncertainty/oracle curves,
    and their ratio.  1 means oracle-grade ordering, 0 random, negative
    worse than random; values never exceed 1 beyond roundoff."""

    metric: str
    ar_uncertainty: float
    ar_oracle: float
    prr: float


def prr_from_arrays(errors: np.ndarray, scores: np.ndarray, metric: str = "mcr") -> PrrResult:
    unc = rejection_curve_from_arrays(errors, scores, "uncertainty", metric)
    orc = rejection_curve_from_arrays(errors, None, "oracle", metric)
    rand = rejection_curve_from_arrays(errors, None, "random-analytic", metric)
    ar_unc = float(np.trapezoid(rand.values - unc.values, rand.fractions))
    ar_orc = float(np.trapezoid(rand.values - orc.values, rand.fractions))
    if ar_orc <= 0.0:
        raise DegenerateComputationError(
            "oracle gains no area (all error contributions equal); PRR is undefined"
        )
    return PrrResult(metric=metric, ar_uncertainty=ar_unc, ar_oracle=ar_orc,
                     prr=ar_unc / ar_orc)


def prr(
    records: Sequence[PredictionRecord],
    metric: str = "mcr",
    score: tuple[Measure | str, str] = (Measure.ENTROPY, "tu"),
) -> PrrResult:
    """Prediction rejection ratio of an uncertainty score for one metric."""
    errors = error_contributions(records, metric)
    scores = _resolve_score(records, score)
    return prr_from_arrays(errors, scores, metric)


def auc_roc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve of ``scores`` against binary ``labels``
    (1 = positive), via the rank-sum form with average ranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be matching 1-d vectors")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateComputationError("AUC needs both a positive and a negative class")
    ranks = rankdata(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
