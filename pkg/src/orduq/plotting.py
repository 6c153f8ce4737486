"""Static figure rendering for curves, rank comparisons, and simplex sweeps.

All functions render with the non-interactive Agg backend and write the
figure to the given path (format follows the suffix, SVG by default in
the CLI), returning the path.  Nothing is displayed.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import RejectionCurve
from .measures import SimplexSweep
from .stats import TestReport

__all__ = ["save_rejection_figure", "save_rank_figure", "save_simplex_figure"]


def _styled(name: str) -> dict:
    lowered = name.lower()
    if "oracle" in lowered:
        return {"linestyle": "--", "color": "black", "linewidth": 1.6}
    if "random" in lowered:
        return {"linestyle": ":", "color": "gray", "linewidth": 1.4}
    return {"linestyle": "-", "linewidth": 1.2}


def save_rejection_figure(
    curves: Mapping[str, RejectionCurve],
    path: str | Path,
    title: str | None = None,
) -> Path:
    """Plot labeled rejection traces into one figure and write it out."""
    if not curves:
        raise ValueError("need at least one curve")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metric = next(iter(curves.values())).metric
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name, curve in curves.items():
        ax.plot(curve.fractions, curve.values, label=name, **_styled(name))
    ax.set_xlabel("rejection fraction")
    ax.set_ylabel(metric)
    ax.set_xlim(0.0, 1.0)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_rank_figure(report: TestReport, path: str | Path, title: str | None = None) -> Path:
    """Draw average ranks on a number line with bars joining tied groups.

    Treatments are placed at their average rank (rank 1 = best on the
    left); a horizontal bar below the axis connects each group whose
    members are not significantly different.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ranks = report.avg_ranks
    ordered = sorted(ranks, key=lambda name: ranks[name])
    t = len(ordered)
    fig, ax = plt.subplots(figsize=(7.0, 2.2 + 0.28 * t))
    ax.set_xlim(0.8, t + 0.2)
    ax.set_ylim(-1.2 - 0.45 * max(1, len(report.groups)), 1.8 + 0.5 * ((t + 1) // 2))
    ax.axhline(0.0, color="black", linewidth=1.2)
    for tick in range(1, t + 1):
        ax.plot([tick, tick], [0.0, 0.12], color="black", linewidth=1.0)
        ax.text(tick, 0.28, str(tick), ha="center", va="bottom", fontsize=8)
    for i, name in enumerate(ordered):
        x = ranks[name]
        # Staircase label heights so close ranks stay readable.
        y = 0.8 + 0.45 * (i // 2)
        ax.plot([x, x], [0.0, y], color="C0", linewidth=0.9)
        ax.text(x, y + 0.06, f"{name} ({x:.2f})", ha="center", va="bottom", fontsize=8)
    for g, group in enumerate(report.groups):
        if len(group) < 2:
            continue
        xs = [ranks[name] for name in group]
        y = -0.5 - 0.42 * g
        ax.plot([min(xs), max(xs)], [y, y], color="black", linewidth=3.0, solid_capstyle="round")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_simplex_figure(sweep: SimplexSweep, path: str | Path, title: str | None = None) -> Path:
    """Render a 3-class simplex sweep as a barycentric heat map."""
    if sweep.k_count != 3:
        raise ValueError(f"simplex rendering needs 3 classes, got {sweep.k_count}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    p = sweep.points
    # Barycentric to Cartesian: corners (0,0), (1,0), (0.5, sqrt(3)/2).
    x = p[:, 1] + 0.5 * p[:, 2]
    y = (np.sqrt(3.0) / 2.0) * p[:, 2]
    fig, ax = plt.subplots(figsize=(5.6, 5.0))
    drawing = ax.tripcolor(x, y, sweep.values, shading="gouraud", cmap="viridis")
    fig.colorbar(drawing, ax=ax, shrink=0.8, label=f"TU ({sweep.measure.value})")
    for label, (cx, cy) in {
        "class 1": (0.0, -0.04),
        "class 2": (1.0, -0.04),
        "class 3": (0.5, np.sqrt(3.0) / 2.0 + 0.02),
    }.items():
        ax.text(cx, cy, label, ha="center", va="center", fontsize=9)
    ax.set_aspect("equal")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
