"""Built-in probabilistic learner: a bagged ensemble of depth-limited trees.

Each member is a CART-style classification tree fit on its own half-size
subsample (drawn without replacement from a per-member seed stream), so
members disagree most where training evidence is thin.  Leaves store
add-one smoothed class frequencies over the full scale, which keeps every
member's output strictly positive on all K classes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..measures import EnsemblePrediction

__all__ = ["ProbabilityTree", "BootstrapEnsemble", "train_bootstrap_ensemble"]


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "probs")

    def __init__(self) -> None:
        self.feature: int | None = None
        self.threshold: float = 0.0
        self.left: "_Node | None" = None
        self.right: "_Node | None" = None
        self.probs: np.ndarray | None = None


def _gini(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    return 1.0 - (counts ** 2).sum(axis=-1) / totals ** 2


@dataclass
class ProbabilityTree:
    """Axis-aligned binary tree with smoothed leaf class distributions.

    Splits minimize weighted Gini impurity; ties resolve to the lowest
    feature index and threshold, so fitting is fully deterministic.
    """

    max_depth: int = 6
    min_leaf: int = 1
    k_count: int = 0
    _root: _Node | None = field(default=None, repr=False)

    def fit(self, features: np.ndarray, labels: np.ndarray, k_count: int) -> "ProbabilityTree":
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if features.ndim != 2 or len(features) != len(labels):
            raise ValueError("features must be 2-d and aligned with labels")
        if len(features) == 0:
            raise ValueError("cannot fit a tree on zero rows")
        self.k_count = int(k_count)
        onehot = np.zeros((len(labels), self.k_count))
        onehot[np.arange(len(labels)), labels - 1] = 1.0
        self._root = self._build(features, labels, onehot, np.arange(len(labels)), 0)
        return self

    def _leaf(self, labels: np.ndarray, idx: np.ndarray) -> _Node:
        node = _Node()
        counts = np.bincount(labels[idx], minlength=self.k_count + 1)[1:].astype(np.float64)
        node.probs = (counts + 1.0) / (counts.sum() + self.k_count)
        return node

    def _build(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        onehot: np.ndarray,
        idx: np.ndarray,
        depth: int,
    ) -> _Node:
        n = idx.size
        node_labels = labels[idx]
        if depth >= self.max_depth or n < 2 * self.min_leaf or n < 2 \
                or np.all(node_labels == node_labels[0]):
            return self._leaf(labels, idx)

        parent_counts = onehot[idx].sum(axis=0)
        parent_gini = float(_gini(parent_counts, np.float64(n)))
        best_score = np.inf
        best: tuple[int, float, np.ndarray] | None = None
        for f in range(features.shape[1]):
            column = features[idx, f]
            order = np.argsort(column, kind="stable")
            xs = column[order]
            if xs[0] == xs[-1]:
                continue
            cum = np.cumsum(onehot[idx][order], axis=0)
            left_counts = cum[:-1]
            left_n = np.arange(1, n, dtype=np.float64)
            right_counts = cum[-1] - left_counts
            right_n = n - left_n
            valid = (xs[1:] > xs[:-1]) & (left_n >= self.min_leaf) & (right_n >= self.min_leaf)
            if not valid.any():
                continue
            score = (
                left_n * _gini(left_counts, left_n)
                + right_n * _gini(right_counts, right_n)
            ) / n
            score[~valid] = np.inf
            pos = int(np.argmin(score))
            if score[pos] < best_score:
                best_score = float(score[pos])
                threshold = (xs[pos] + xs[pos + 1]) / 2.0
                best = (f, threshold, order)

        # Require a strict impurity decrease; otherwise the node is done.
        if best is None or best_score >= parent_gini - 1e-12:
            return self._leaf(labels, idx)

        f, threshold, _ = best
        mask = features[idx, f] <= threshold
        node = _Node()
        node.feature = f
        node.threshold = float(threshold)
        node.left = self._build(features, labels, onehot, idx[mask], depth + 1)
        node.right = self._build(features, labels, onehot, idx[~mask], depth + 1)
        return node

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        if self._root is None:
            raise RuntimeError("tree used before fit")
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        out = np.empty((len(features), self.k_count))
        stack: list[tuple[_Node, np.ndarray]] = [(self._root, np.arange(len(features)))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if node.probs is not None:
                out[idx] = node.probs
                continue
            mask = features[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[mask]))
            stack.append((node.right, idx[~mask]))
        return out


@dataclass
class BootstrapEnsemble:
    """A fixed set of trees sharing one class scale."""

    trees: tuple[ProbabilityTree, ...]
    k_count: int

    @property
    def m_count(self) -> int:
        return len(self.trees)

    def predict_members(self, features: np.ndarray) -> np.ndarray:
        """Member distributions for a feature matrix, shape (N, M, K)."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return np.stack([tree.predict_proba(features) for tree in self.trees], axis=1)

    def predict_one(self, features: np.ndarray) -> EnsemblePrediction:
        matrix = self.predict_members(np.atleast_2d(features))[0]
        return EnsemblePrediction.of(matrix)


def train_bootstrap_ensemble(
    features: np.ndarray,
    labels: np.ndarray,
    k_count: int,
    m_members: int = 10,
    seed: int | np.random.SeedSequence = 0,
    max_depth: int = 6,
    subsample: float = 0.5,
    min_leaf: int = 1,
) -> BootstrapEnsemble:
    """Fit ``m_members`` trees, each on its own subsample of the rows.

    Subsamples are drawn without replacement at rate ``subsample`` from
    independent per-member seed streams, so retraining with the same data
    and seed reproduces the ensemble bit for bit.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if m_members < 1:
        raise ValueError(f"need at least one member, got {m_members}")
    if not 0.0 < subsample <= 1.0:
        raise ValueError(f"subsample rate must lie in (0, 1], got {subsample}")
    if np.any(labels < 1) or np.any(labels > k_count):
        raise ValueError(f"labels must lie in 1..{k_count}")
    if np.unique(labels).size < 2:
        warnings.warn(
            "training labels contain a single class; the ensemble will be a constant predictor",
            stacklevel=2,
        )

    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n = len(features)
    n_sub = max(1, int(round(subsample * n)))
    trees = []
    for child in seed_seq.spawn(m_members):
        rng = np.random.default_rng(child)
        idx = np.sort(rng.choice(n, size=n_sub, replace=False))
        tree = ProbabilityTree(max_depth=max_depth, min_leaf=min_leaf)
        trees.append(tree.fit(features[idx], labels[idx], k_count))
    return BootstrapEnsemble(trees=tuple(trees), k_count=int(k_count))
