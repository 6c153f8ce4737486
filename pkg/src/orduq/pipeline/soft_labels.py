"""Geometric unimodal label smoothing for ordinal targets.

A hard label ``c`` becomes a distribution that keeps mass ``1 - alpha``
at ``c`` and spreads the rest over the other classes with geometric
decay in the class distance, so the result is unimodal on the ordinal
scale and sharpest at the true class.
"""

from __future__ import annotations

import numpy as np

from ..measures import ProbabilityVector

__all__ = ["soft_label_geometric", "SOFT_LABEL_ALPHA_GRID"]

# Smoothing factors used by the evaluation harness when sweeping.
SOFT_LABEL_ALPHA_GRID: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(1, 11))


def soft_label_geometric(y: int, k_count: int, alpha: float) -> ProbabilityVector:
    """Smooth the hard label ``y`` over ``k_count`` ordered classes.

    The mode keeps probability ``1 - alpha``; a class at distance ``d``
    from the mode gets ``alpha**(d + 1) * (1 - alpha) / G`` where ``G``
    normalizes the off-mode mass to ``alpha``.  ``alpha = 0`` returns
    the one-hot vector.
    """
    if not 1 <= y <= k_count:
        raise ValueError(f"label {y} outside 1..{k_count}")
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    if alpha == 0.0:
        probs = np.zeros(k_count)
        probs[y - 1] = 1.0
        return ProbabilityVector(tuple(probs))
    distance = np.abs(np.arange(1, k_count + 1) - y)
    g = np.sum(alpha ** distance[distance > 0] * (1.0 - alpha))
    probs = alpha ** (distance + 1.0) * (1.0 - alpha) / g
    probs[y - 1] = 1.0 - alpha
    return ProbabilityVector(tuple(probs))
