"""Threshold detection on the aggregated feature and its ROC evaluation.

A window is declared active when its feature value reaches the threshold
tau.  Sweeping tau over the observed value range produces the ROC curve;
the area under it summarizes detection quality independent of any single
operating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .pipeline import FeatureSeries

DEFAULT_THRESHOLDS = 1000


@dataclass(frozen=True)
class GroundTruth:
    """Activity intervals [start, end), normalized on construction.

    Overlapping or touching intervals are merged, so the stored tuple is
    sorted and disjoint.
    """

    intervals: tuple[tuple[float, float], ...]

    def __init__(self, intervals) -> None:
        cleaned = []
        for pair in intervals:
            start, end = (float(v) for v in pair)
            if not end > start:
                raise ConfigError(f"interval [{start}, {end}) is empty or reversed")
            cleaned.append((start, end))
        cleaned.sort()
        merged: list[tuple[float, float]] = []
        for start, end in cleaned:
            if merged and start <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], end))
            else:
                merged.append((start, end))
        object.__setattr__(self, "intervals", tuple(merged))

    def overlap_with(self, start: float, end: float) -> float:
        """Total time the intervals overlap [start, end)."""
        total = 0.0
        for lo, hi in self.intervals:
            total += max(0.0, min(hi, end) - max(lo, start))
        return total


@dataclass(frozen=True, eq=False)
class RocCurve:
    """One (TPR, FPR) point per swept threshold.

    The anchor points (0,0) and (1,1) are not part of the arrays; they are
    appended when computing the area (see :func:`auc`).
    """

    taus: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=np.float64)
        tpr = np.asarray(self.tpr, dtype=np.float64)
        fpr = np.asarray(self.fpr, dtype=np.float64)
        if not taus.shape == tpr.shape == fpr.shape:
            raise ConfigError("taus, tpr, fpr must align")
        for name, arr in (("tpr", tpr), ("fpr", fpr)):
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ConfigError(f"{name} outside [0, 1]")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "tpr", tpr)
        object.__setattr__(self, "fpr", fpr)

    def points_with_anchors(self) -> tuple[np.ndarray, np.ndarray]:
        """(fpr, tpr) arrays including the (0,0) and (1,1) anchors."""
        fpr = np.concatenate((self.fpr, [0.0, 1.0]))
        tpr = np.concatenate((self.tpr, [0.0, 1.0]))
        return fpr, tpr


def label_windows(
    truth: GroundTruth,
    series: FeatureSeries,
    overlap_frac: float = 0.5,
) -> np.ndarray:
    """Ground-truth label per window: 1 when the activity intervals cover
    at least ``overlap_frac`` of the window's length."""
    if not 0.0 <= overlap_frac <= 1.0:
        raise ConfigError(f"overlap_frac must be in [0, 1], got {overlap_frac}")
    w2 = series.window_length
    need = overlap_frac * w2
    labels = np.zeros(series.n_windows, dtype=np.uint8)
    for k, start in enumerate(series.window_starts):
        if truth.overlap_with(float(start), float(start) + w2) >= need:
            labels[k] = 1
    return labels


def classify(series: FeatureSeries, tau: float) -> np.ndarray:
    """Per-window decision: 1 where the feature reaches ``tau``."""
    return (series.values >= tau).astype(np.uint8)


def confusion(predicted: np.ndarray, labels: np.ndarray) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) counts for 0/1 arrays of equal length."""
    predicted = np.asarray(predicted).astype(bool)
    labels = np.asarray(labels).astype(bool)
    if predicted.shape != labels.shape:
        raise ConfigError("predicted and labels must align")
    tp = int(np.sum(predicted & labels))
    fp = int(np.sum(predicted & ~labels))
    tn = int(np.sum(~predicted & ~labels))
    fn = int(np.sum(~predicted & labels))
    return tp, fp, tn, fn


def roc(
    series: FeatureSeries,
    labels: np.ndarray,
    n_thresholds: int = DEFAULT_THRESHOLDS,
) -> RocCurve:
    """Sweep ``n_thresholds`` linearly spaced taus over the value range.

    TPR = TP / (TP + FN) and FPR = FP / (FP + TN) per threshold.  Raises
    when only one class is present, since the rates are undefined then.
    """
    if n_thresholds < 2:
        raise ConfigError(f"n_thresholds must be at least 2, got {n_thresholds}")
    values = series.values
    labels = np.asarray(labels).astype(bool)
    if labels.shape != values.shape:
        raise ConfigError("labels must align with the series")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigError(
            f"degenerate ground truth ({n_pos} positive, {n_neg} negative windows)"
        )
    taus = np.linspace(float(values.min()), float(values.max()), n_thresholds)
    pos_sorted = np.sort(values[labels])
    neg_sorted = np.sort(values[~labels])
    # count of values >= tau via searchsorted on the sorted class values
    tp = n_pos - np.searchsorted(pos_sorted, taus, side="left")
    fp = n_neg - np.searchsorted(neg_sorted, taus, side="left")
    return RocCurve(taus, tp / n_pos, fp / n_neg)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve.

    The anchors (0,0) and (1,1) are appended and the points sorted by
    FPR, TPR breaking ties so each equal-FPR run ends at its maximal
    TPR.  Both coordinates are non-increasing in tau, so this order
    reconstructs the threshold path; integrating over all of it keeps
    the area equal to the pairwise ranking statistic whenever the grid
    resolves the score transitions.  Equal-FPR runs and duplicate
    points span zero width and cost nothing.
    """
    fpr, tpr = curve.points_with_anchors()
    order = np.lexsort((tpr, fpr))
    return float(np.trapezoid(tpr[order], fpr[order]))


# --- file formats ----------------------------------------------------------

def write_truth_csv(truth: GroundTruth, dest) -> None:
    """Export activity intervals as ``start,end`` rows."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_truth_csv(truth, fh)
        return
    dest.write("start,end\n")
    for start, end in truth.intervals:
        dest.write(f"{start:.6f},{end:.6f}\n")


def read_truth_csv(source) -> GroundTruth:
    """Parse a ``start,end`` interval file; errors name the line."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_truth_csv(fh)
    intervals = []
    header_seen = False
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != "start,end":
                raise FormatError(f"line {lineno}: expected 'start,end' header")
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise FormatError(f"line {lineno}: expected two columns")
        try:
            start, end = float(fields[0]), float(fields[1])
        except ValueError:
            raise FormatError(f"line {lineno}: bad interval bounds") from None
        if not end > start:
            raise FormatError(f"line {lineno}: interval [{start}, {end}) is empty")
        intervals.append((start, end))
    if not header_seen:
        raise FormatError("truth file has no header line")
    return GroundTruth(intervals)


def format_metrics(entries: dict) -> str:
    """Render a metrics report as aligned ``name  value`` lines."""
    if not entries:
        return ""
    width = max(len(k) for k in entries)
    lines = []
    for key, value in entries.items():
        if isinstance(value, float):
            text = f"{value:.6f}"
        else:
            text = str(value)
        lines.append(f"{key.ljust(width)}  {text}")
    return "\n".join(lines) + "\n"


def parse_metrics(text: str) -> dict:
    """Inverse of format_metrics (values come back as strings)."""
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("  ")
        out[key.strip()] = value.strip()
    return out
