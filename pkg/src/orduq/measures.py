"""Total, aleatoric and epistemic uncertainty for ordinal classifier ensembles.

A prediction for one instance is a set of M probability distributions over
K ordered classes, one per ensemble member.  Every measure splits total
uncertainty (TU) into an aleatoric part (AU, irreducible randomness of the
outcome) and an epistemic part (EU, disagreement between members), with
TU = AU + EU up to clamping noise:

``ent``
    Shannon entropy of the mean distribution; AU is the mean member
    entropy and EU the difference, i.e. the mutual information between
    the class and the member identity.
``var``
    Variance of the class index under the integer encoding 1..K, split
    by the law of total variance.
``bin-ent`` / ``bin-var``
    Each class is reduced to a one-vs-rest binary problem; the binary
    entropy (or Bernoulli variance) decomposition is applied per class
    and the K triples are summed.
``ord-ent`` / ``ord-var``
    The scale is cut between consecutive classes into K-1 lower/upper
    binary problems, so the reduction respects class order; the binary
    triples are summed.

Order sensitivity is the point of the last pair: ``ent`` and the
one-vs-rest measures are invariant under class permutations, while
``ord-ent`` and ``ord-var`` peak at the extreme bimodal distribution
(half the mass on each end of the scale) rather than at the uniform one.

Entropies default to base 2, so values are in bits; every entry point
accepts a ``log_base`` override.  0*log(0) is evaluated as 0 by
branching, never by epsilon padding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Measure",
    "ClassScale",
    "ProbabilityVector",
    "EnsemblePrediction",
    "BinaryDistribution",
    "UncertaintyTriple",
    "SimplexSweep",
    "shannon_entropy",
    "ordinal_variance",
    "posterior_mean",
    "one_vs_rest_reduce",
    "ocs_reduce",
    "decompose_entropy",
    "decompose_variance",
    "aggregate_labelwise",
    "aggregate_ordinal",
    "compute_uncertainty",
    "batch_decompose",
    "simplex_grid",
    "simplex_heatmap",
]

SUM_TOL = 1e-9
# Negative epistemic values below -CLAMP_TOL indicate broken inputs rather
# than roundoff and are reported instead of silently clamped.
CLAMP_TOL = 1e-9


class Measure(enum.Enum):
    """Tags for the six uncertainty measures."""

    ENTROPY = "ent"
    VARIANCE = "var"
    BINARY_ENTROPY = "bin-ent"
    BINARY_VARIANCE = "bin-var"
    ORDINAL_ENTROPY = "ord-ent"
    ORDINAL_VARIANCE = "ord-var"

    @classmethod
    def from_string(cls, tag: "Measure | str") -> "Measure":
        if isinstance(tag, Measure):
            return tag
        for member in cls:
            if member.value == tag:
                return member
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown measure {tag!r}; expected one of: {valid}")

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


ALL_MEASURES: tuple[Measure, ...] = tuple(Measure)

UNCERTAINTY_KINDS: tuple[str, ...] = ("tu", "au", "eu")


def _validate_log_base(log_base: float) -> float:
    if not np.isfinite(log_base) or log_base <= 1.0:
        raise ValueError(f"log base must be a finite number > 1, got {log_base}")
    return float(log_base)


def _log(x: np.ndarray, log_base: float) -> np.ndarray:
    if log_base == 2.0:
        return np.log2(x)
    if log_base == np.e:
        return np.log(x)
    return np.log(x) / np.log(log_base)


def _xlogx(p: np.ndarray, log_base: float) -> np.ndarray:
    # Branch on p > 0 so that 0*log(0) contributes exactly 0.
    safe = np.where(p > 0.0, p, 1.0)
    return np.where(p > 0.0, p * _log(safe, log_base), 0.0)


@dataclass(frozen=True)
class ClassScale:
    """An ordered class scale encoded as the integers 1..k_count."""

    k_count: int

    def __post_init__(self) -> None:
        if self.k_count < 2:
            raise ValueError(f"a class scale needs at least 2 classes, got {self.k_count}")

    @property
    def classes(self) -> range:
        return range(1, self.k_count + 1)


@dataclass(frozen=True)
class ProbabilityVector:
    """A distribution over an ordered class scale.

    Entries must be finite and nonnegative and sum to 1 within ``SUM_TOL``.
    Inputs that miss the sum constraint by more than that are never fixed
    up silently; use :meth:`renormalized` to opt in explicitly.
    """

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.probs)
        object.__setattr__(self, "probs", values)
        if len(values) < 2:
            raise ValueError(f"need at least 2 classes, got {len(values)}")
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("probabilities must be finite")
        if np.any(arr < 0.0):
            raise ValueError(f"probabilities must be nonnegative, got {values}")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(
                f"probabilities sum to {total!r}, off by more than {SUM_TOL}; "
                "renormalize explicitly if this is intended"
            )

    @classmethod
    def renormalized(cls, values: Iterable[float], tol: float = 1e-6) -> "ProbabilityVector":
        """Rescale ``values`` to sum exactly to 1, provided the raw sum is
        within ``tol`` of 1.  Larger deviations are rejected."""
        arr = np.asarray(tuple(values), dtype=np.float64)
        if arr.size and np.all(np.isfinite(arr)) and np.any(arr < 0.0):
            raise ValueError("cannot renormalize negative probabilities")
        total = float(arr.sum())
        if not np.isfinite(total) or abs(total - 1.0) > tol:
            raise ValueError(f"sum {total!r} is more than {tol} away from 1")
        return cls(tuple(arr / total))

    @property
    def k_count(self) -> int:
        return len(self.probs)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.probs, dtype=np.float64)
        arr.setflags(write=False)
        return arr


@dataclass(frozen=True)
class EnsemblePrediction:
    """Per-member distributions for one instance, all on the same scale."""

    members: tuple[ProbabilityVector, ...]

    def __post_init__(self) -> None:
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise ValueError("an ensemble prediction needs at least one member")
        k = members[0].k_count
        if any(m.k_count != k for m in members):
            raise ValueError("all members must share the same class count")

    @classmethod
    def of(cls, matrix: np.ndarray | Sequence[Sequence[float]]) -> "EnsemblePrediction":
        arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        return cls(tuple(ProbabilityVector(tuple(row)) for row in arr))

    @property
    def m_count(self) -> int:
        return len(self.members)

    @property
    def k_count(self) -> int:
        return self.members[0].k_count

    @cached_property
    def matrix(self) -> np.ndarray:
        arr = np.stack([m.array for m in self.members])
        arr.setflags(write=False)
        return arr


@dataclass(frozen=True)
class BinaryDistribution:
    """A two-outcome distribution produced by a binary reduction."""

    p0: float
    p1: float

    def __post_init__(self) -> None:
        p0, p1 = float(self.p0), float(self.p1)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)
        if not (np.isfinite(p0) and np.isfinite(p1)):
            raise ValueError("binary probabilities must be finite")
        if p0 < 0.0 or p1 < 0.0:
            raise ValueError(f"binary probabilities must be nonnegative, got ({p0}, {p1})")
        if abs(p0 + p1 - 1.0) > SUM_TOL:
            raise ValueError(f"binary probabilities sum to {p0 + p1!r}, not 1")


@dataclass(frozen=True)
class UncertaintyTriple:
    """A (total, aleatoric, epistemic) split under one measure.

    All three parts are nonnegative and satisfy |tu - (au + eu)| <= 1e-9.
    """

    tu: float
    au: float
    eu: float
    measure: Measure

    def __post_init__(self) -> None:
        for name in ("tu", "au", "eu"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if abs(self.tu - (self.au + self.eu)) > 1e-9:
            raise ValueError(
                f"inconsistent triple: tu={self.tu!r}, au+eu={self.au + self.eu!r}"
            )

    def __getitem__(self, kind: str) -> float:
        if kind not in UNCERTAINTY_KINDS:
            raise KeyError(f"unknown uncertainty kind {kind!r}")
        return getattr(self, kind)


# ---------------------------------------------------------------------------
# Scalar building blocks
# ---------------------------------------------------------------------------


def shannon_entropy(p: ProbabilityVector | Sequence[float], log_base: float = 2.0) -> float:
    """Shannon entropy of a distribution, 0 for one-hot inputs."""
    log_base = _validate_log_base(log_base)
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(tuple(p))
    return float(-_xlogx(p.array, log_base).sum())


def ordinal_variance(p: ProbabilityVector | Sequence[float]) -> float:
    """Variance of the class index under the integer encoding 1..K.

    Bounded by (K-1)^2/4, attained only by the extreme bimodal
    distribution with half the mass on class 1 and half on class K.
    """
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(tuple(p))
    k = np.arange(1, p.k_count + 1, dtype=np.float64)
    mean = float((p.array * k).sum())
    return float((p.array * (k - mean) ** 2).sum())


def posterior_mean(m: EnsemblePrediction) -> ProbabilityVector:
    """Uniformly weighted mean of the member distributions."""
    return ProbabilityVector(tuple(m.matrix.mean(axis=0)))


def one_vs_rest_reduce(p: ProbabilityVector, k: int) -> BinaryDistribution:
    """Binary view of class ``k`` against all others: p1 = p_k, p0 = rest."""
    if not 1 <= k <= p.k_count:
        raise ValueError(f"class index {k} outside 1..{p.k_count}")
    p1 = p.probs[k - 1]
    p0 = float(sum(p.probs[i] for i in range(p.k_count) if i != k - 1))
    return BinaryDistribution(p0, p1)


def ocs_reduce(p: ProbabilityVector, k: int) -> BinaryDistribution:
    """Cut the ordered scale after class ``k``: p0 = mass on classes <= k,
    p1 = mass above.  Valid for k = 1..K-1; p0 is non-decreasing in k."""
    if not 1 <= k <= p.k_count - 1:
        raise ValueError(f"split index {k} outside 1..{p.k_count - 1}")
    p0 = float(sum(p.probs[:k]))
    p1 = float(sum(p.probs[k:]))
    return BinaryDistribution(p0, p1)


# ---------------------------------------------------------------------------
# Batch kernels
#
# All kernels take a member array of shape (N, M, K) and return per-kind
# arrays of shape (N,).  The scalar API wraps them with N = 1.
# ---------------------------------------------------------------------------


def _as_member_array(members: np.ndarray) -> np.ndarray:
    arr = np.asarray(members, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis, :, :]
    if arr.ndim != 3:
        raise ValueError(f"expected member array of shape (N, M, K), got {arr.shape}")
    if arr.shape[1] < 1 or arr.shape[2] < 2:
        raise ValueError(f"need M >= 1 members over K >= 2 classes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("member probabilities must be finite")
    if np.any(arr < 0.0):
        raise ValueError("member probabilities must be nonnegative")
    sums = arr.sum(axis=2)
    worst = float(np.abs(sums - 1.0).max())
    if worst > SUM_TOL:
        raise ValueError(f"member rows must sum to 1 within {SUM_TOL}, worst deviation {worst!r}")
    return arr


def _entropy_nd(p: np.ndarray, log_base: float) -> np.ndarray:
    return -_xlogx(p, log_base).sum(axis=-1)


def _clamp_eu(eu: np.ndarray) -> np.ndarray:
    worst = float(eu.min()) if eu.size else 0.0
    if worst < -CLAMP_TOL:
        raise ValueError(
            f"epistemic part {worst!r} is below -{CLAMP_TOL}; inputs are inconsistent"
        )
    return np.maximum(eu, 0.0)


def _entropy_parts(arr: np.ndarray, log_base: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = arr.mean(axis=1)
    tu = _entropy_nd(mean, log_base)
    au = _entropy_nd(arr, log_base).mean(axis=1)
    eu = _clamp_eu(tu - au)
    return tu, au, eu


def _variance_parts(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = np.arange(1, arr.shape[2] + 1, dtype=np.float64)
    member_means = (arr * k).sum(axis=2)                      # (N, M)
    member_vars = (arr * (k - member_means[..., np.newaxis]) ** 2).sum(axis=2)
    grand_mean = member_means.mean(axis=1)                    # (N,)
    au = member_vars.mean(axis=1)
    eu = ((grand_mean[:, np.newaxis] - member_means) ** 2).mean(axis=1)
    mean_dist = arr.mean(axis=1)
    tu = (mean_dist * (k - grand_mean[:, np.newaxis]) ** 2).sum(axis=1)
    return tu, au, eu


def _binary_split_parts(
    p1: np.ndarray, base: str, log_base: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-split binary decomposition summed over splits.

    ``p1`` holds the positive-side member probabilities, shape (N, M, S)
    for S binary subproblems.
    """
    p1 = np.clip(p1, 0.0, 1.0)
    mean1 = p1.mean(axis=1)                                   # (N, S)
    if base == "ent":
        stacked = np.stack([1.0 - p1, p1], axis=-1)
        mean_stacked = np.stack([1.0 - mean1, mean1], axis=-1)
        tu_s = _entropy_nd(mean_stacked, log_base)            # (N, S)
        au_s = _entropy_nd(stacked, log_base).mean(axis=1)
        eu_s = _clamp_eu(tu_s - au_s)
    elif base == "var":
        tu_s = mean1 * (1.0 - mean1)
        au_s = (p1 * (1.0 - p1)).mean(axis=1)
        eu_s = ((mean1[:, np.newaxis, :] - p1) ** 2).mean(axis=1)
    else:
        raise ValueError(f"base must be 'ent' or 'var', got {base!r}")
    return tu_s.sum(axis=1), au_s.sum(axis=1), eu_s.sum(axis=1)


def batch_decompose(
    members: np.ndarray, measure: Measure | str, log_base: float = 2.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Compute (tu, au, eu) arrays for a batch of ensemble predictions.

    Parameters
    ----------
    members:
        Array of shape (N, M, K); a single (M, K) prediction is promoted.
    measure:
        One of the six measure tags.
    log_base:
        Base for the entropy-backed measures, ignored by the variance ones.
    """
    measure = Measure.from_string(measure)
    log_base = _validate_log_base(log_base)
    arr = _as_member_array(members)
    if measure is Measure.ENTROPY:
        return _entropy_parts(arr, log_base)
    if measure is Measure.VARIANCE:
        return _variance_parts(arr)
    if measure in (Measure.BINARY_ENTROPY, Measure.BINARY_VARIANCE):
        # One-vs-rest: the positive-side probability of class k is p_k itself.
        base = "ent" if measure is Measure.BINARY_ENTROPY else "var"
        return _binary_split_parts(arr, base, log_base)
    # Order-consistent splits: p(> k) = 1 - cumulative mass up to k.
    upper = 1.0 - np.cumsum(arr, axis=2)[:, :, : arr.shape[2] - 1]
    base = "ent" if measure is Measure.ORDINAL_ENTROPY else "var"
    return _binary_split_parts(upper, base, log_base)


def _triple_from_batch(
    m: EnsemblePrediction, measure: Measure, log_base: float
) -> UncertaintyTriple:
    tu, au, eu = batch_decompose(m.matrix, measure, log_base)
    return UncertaintyTriple(float(tu[0]), float(au[0]), float(eu[0]), measure)


def decompose_entropy(m: EnsemblePrediction, log_base: float = 2.0) -> UncertaintyTriple:
    """Entropy split: TU is the entropy of the mean distribution, AU the
    mean member entropy, EU their difference (clamped at 0)."""
    return _triple_from_batch(m, Measure.ENTROPY, log_base)


def decompose_variance(m: EnsemblePrediction) -> UncertaintyTriple:
    """Law-of-total-variance split of the class-index variance."""
    return _triple_from_batch(m, Measure.VARIANCE, 2.0)


def aggregate_labelwise(
    m: EnsemblePrediction, base: str = "ent", log_base: float = 2.0
) -> UncertaintyTriple:
    """Sum of binary decompositions over the K one-vs-rest reductions.

    ``base`` selects the binary measure: ``"ent"`` for binary entropy,
    ``"var"`` for Bernoulli variance.
    """
    measure = Measure.BINARY_ENTROPY if base == "ent" else Measure.BINARY_VARIANCE
    if base not in ("ent", "var"):
        raise ValueError(f"base must be 'ent' or 'var', got {base!r}")
    return _triple_from_batch(m, measure, log_base)


def aggregate_ordinal(
    m: EnsemblePrediction, base: str = "ent", log_base: float = 2.0
) -> UncertaintyTriple:
    """Sum of binary decompositions over the K-1 order-consistent splits."""
    measure = Measure.ORDINAL_ENTROPY if base == "ent" else Measure.ORDINAL_VARIANCE
    if base not in ("ent", "var"):
        raise ValueError(f"base must be 'ent' or 'var', got {base!r}")
    return _triple_from_batch(m, measure, log_base)


def compute_uncertainty(
    m: EnsemblePrediction, measure: Measure | str, log_base: float = 2.0
) -> UncertaintyTriple:
    """Dispatch to the decomposition behind ``measure``."""
    return _triple_from_batch(m, Measure.from_string(measure), _validate_log_base(log_base))


# ---------------------------------------------------------------------------
# Simplex sweeps
# ---------------------------------------------------------------------------

# Guard against accidental combinatorial blowups when sweeping fine grids
# over K > 3 simplices.
MAX_GRID_CELLS = 2_000_000


@dataclass(frozen=True)
class SimplexSweep:
    """Total uncertainty of single-member ensembles over a simplex lattice."""

    measure: Measure
    grid_step: float
    points: np.ndarray = field(repr=False)  # (N, K), rows sum to 1
    values: np.ndarray = field(repr=False)  # (N,) total uncertainty

    @property
    def k_count(self) -> int:
        return int(self.points.shape[1])


def simplex_grid(k_count: int, grid_step: float) -> np.ndarray:
    """Closed barycentric lattice over the (k_count-1)-simplex.

    ``grid_step`` must divide 1 evenly and lie in (0, 0.1].  For K = 3 and
    a step of 0.01 the lattice has 5151 points.
    """
    if k_count < 2:
        raise ValueError(f"need at least 2 classes, got {k_count}")
    if not 0.0 < grid_step <= 0.1:
        raise ValueError(f"grid step must lie in (0, 0.1], got {grid_step}")
    n = int(round(1.0 / grid_step))
    if abs(n * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid step {grid_step} does not divide 1 evenly")

    def count(parts: int) -> int:
        from math import comb

        return comb(n + parts - 1, parts - 1)

    total = count(k_count)
    if total > MAX_GRID_CELLS:
        raise ValueError(
            f"lattice would have {total} cells (limit {MAX_GRID_CELLS}); "
            "use a coarser grid step for this many classes"
        )

    rows = np.empty((total, k_count), dtype=np.float64)
    pos = 0

    def fill(prefix: list[int], remaining: int, parts: int) -> None:
        nonlocal pos
        if parts == 1:
            rows[pos, : len(prefix)] = prefix
            rows[pos, len(prefix)] = remaining
            pos += 1
            return
        for i in range(remaining + 1):
            fill(prefix + [i], remaining - i, parts - 1)

    fill([], n, k_count)
    rows /= float(n)
    return rows


def simplex_heatmap(
    measure: Measure | str,
    grid_step: float = 0.01,
    k_count: int = 3,
    log_base: float = 2.0,
) -> SimplexSweep:
    """Evaluate one measure's total uncertainty over a simplex lattice.

    The 3-class sweep is the one meant for rendering; higher class counts
    still produce the lattice values but no figure.
    """
    measure = Measure.from_string(measure)
    points = simplex_grid(k_count, grid_step)
    tu, _, _ = batch_decompose(points[:, np.newaxis, :], measure, log_base)
    return SimplexSweep(measure=measure, grid_step=float(grid_step), points=points, values=tu)
