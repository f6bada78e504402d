"""Figure rendering for curve and evaluation reports.

Every CLI report path that writes a delimited table can also render the
matching figure next to it; the CSV stays the canonical artifact.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .allocation import BOUNDARY, REGION, DiversityCurve
from .evaluation import PrCurve

_STYLE = {
    "greedy": {"color": "#d62728", "linestyle": "-"},
    "perfect": {"color": "#2ca02c", "linestyle": "--"},
    "status_quo": {"color": "#7f7f7f", "linestyle": ":"},
    "sos": {"color": "#9467bd", "linestyle": "-."},
    "wp_bb": {"color": "#1f77b4", "linestyle": "--"},
    "wp_seg": {"color": "#17becf", "linestyle": "-"},
}

_MEASURE_TITLES = {REGION: "Region diversity", BOUNDARY: "Boundary diversity"}


def save_diversity_figure(curves: Sequence[DiversityCurve], out_path) -> Path:
    """One panel per measure, every strategy overlaid, like the budget sweep
    comparisons the curves were built for."""
    measures = [m for m in (REGION, BOUNDARY) if any(c.measure == m for c in curves)]
    fig, axes = plt.subplots(1, len(measures), figsize=(6 * len(measures), 4.5), squeeze=False)
    for ax, measure in zip(axes[0], measures):
        for curve in curves:
            if curve.measure != measure:
                continue
            xs = [p[0] for p in curve.points]
            ys = [p[1] for p in curve.points]
            label = curve.strategy
            if curve.seeds_used:
                label += f" (mean of {curve.seeds_used} seeds)"
            ax.plot(xs, ys, label=label, **_STYLE.get(curve.strategy, {}))
        ax.set_xlabel("fraction of redundancy budget spent")
        ax.set_ylabel("fraction of total diversity captured")
        ax.set_title(_MEASURE_TITLES.get(measure, measure))
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def save_pr_figure(curves: Mapping[str, PrCurve], out_path) -> Path:
    """Precision-recall overlay with per-method average precision."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name in sorted(curves):
        curve = curves[name]
        recalls = [0.0] + [p[0] for p in curve.points]
        precisions = [curve.points[0][1]] + [p[1] for p in curve.points]
        ax.step(recalls, precisions, where="post",
                label=f"{name} (AP {curve.average_precision:.3f})")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
