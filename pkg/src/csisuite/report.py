"""Figure rendering for the analysis CLI.

Every function writes one PNG next to the delimited outputs.  Rendering
uses the Agg backend and fixed styling so that re-running a command
reproduces the file byte for byte.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .detector import GroundTruth, RocCurve
from .pipeline import FeatureSeries
from .storage import SweepReport

_FIGSIZE = (8.0, 4.5)
_TRUTH_COLOR = "#f4b942"
_STAGE_COLORS = {1: "#1f77b4", 2: "#ff7f0e", 3: "#2ca02c", 4: "#d62728"}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def save_feature_figure(series: FeatureSeries, truth: GroundTruth | None,
                        path: str | Path, title: str = "windowed amplitude deviation") -> Path:
    """Aggregate feature over time, activity intervals shaded."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    if truth is not None:
        shown = False
        for start, end in truth.intervals:
            ax.axvspan(start, end, color=_TRUTH_COLOR, alpha=0.35, lw=0,
                       label=None if shown else "labeled activity")
            shown = True
    valid = series.valid.astype(bool)
    centers = series.window_starts + series.window_length / 2.0
    ax.plot(centers[valid], series.values[valid], lw=1.0, color="#1f77b4",
            label="feature")
    if not valid.all():
        ax.plot(centers[~valid], np.zeros(int((~valid).sum())), ls="none",
                marker="x", ms=4, color="#999999", label="invalid window")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("aggregate std of amplitude")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def save_roc_figure(curve: RocCurve, path: str | Path,
                    auc_value: float | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    fpr, tpr = curve.points_with_anchors()
    order = np.lexsort((tpr, fpr))
    label = "ROC" if auc_value is None else f"ROC (AUC {auc_value:.4f})"
    ax.plot(fpr[order], tpr[order], lw=1.2, color="#1f77b4", label=label)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="#999999", label="chance")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("threshold sweep")
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, path)


def save_rate_figure(report: SweepReport, path: str | Path) -> Path:
    """AUC against the frame-decimation factor."""
    rows = sorted(report.rows, key=lambda r: r.bits_or_f)
    f = [r.bits_or_f for r in rows]
    auc_values = [r.auc for r in rows]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(f, auc_values, marker="o", ms=3, lw=1.0, color="#1f77b4")
    ax.set_xlabel("decimation factor f (keep 1 in f frames)")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("detection accuracy vs transmission rate")
    ax.grid(True, lw=0.3, alpha=0.5)
    return _save(fig, path)


def save_quant_figure(report: SweepReport, path: str | Path) -> Path:
    """AUC against quantizer width, one line per pipeline stage."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    stages = sorted({r.stage for r in report.rows})
    for stage in stages:
        rows = sorted((r for r in report.rows if r.stage == stage),
                      key=lambda r: r.bits_or_f)
        ax.plot([r.bits_or_f for r in rows], [r.auc for r in rows],
                marker="o", ms=3, lw=1.0,
                color=_STAGE_COLORS.get(stage), label=f"stage {stage}")
    ax.set_xlabel("quantizer width B [bits]")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("detection accuracy vs quantizer width")
    ax.grid(True, lw=0.3, alpha=0.5)
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, path)
