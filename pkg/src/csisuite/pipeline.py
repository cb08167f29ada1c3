"""Amplitude pipeline: extraction, outlier filtering, window aggregation.

The pipeline turns a capture into one scalar per aggregation window:

1. extraction: per-frame amplitudes sqrt(re**2 + im**2) of the configured
   subcarriers, carried as float64;
2. outlier filtering: per subcarrier, a value whose deviation from the
   trailing-window mean exceeds ``lam`` standard deviations is replaced by
   the previous filtered value;
3. aggregation: per non-overlapping window of ``w2`` seconds, the mean
   over subcarriers of the per-subcarrier population standard deviation.

Movement raises the per-window deviation, so the aggregated series is the
detection feature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .capture_io import CaptureDocument
from .core import PipelineParams, SubcarrierSet, default_subcarrier_set
from .errors import ConfigError, NoFramesError


@dataclass(frozen=True, eq=False)
class AmplitudeMatrix:
    """Per-frame, per-subcarrier amplitudes of one capture.

    ``values`` has shape (n_frames, n_subcarriers), columns in ascending
    subcarrier index order; ``filtered`` tells whether the outlier filter
    has run over it.
    """

    timestamps: np.ndarray
    values: np.ndarray
    subcarriers: SubcarrierSet
    filtered: bool

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape != (ts.shape[0], len(self.subcarriers)):
            raise ConfigError(
                f"values shape {values.shape} does not match "
                f"{ts.shape[0]} frames x {len(self.subcarriers)} subcarriers"
            )
        if ts.size and np.any(np.diff(ts) < 0):
            raise ConfigError("timestamps must be non-decreasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def equals(self, other: "AmplitudeMatrix") -> bool:
        return (
            self.filtered == other.filtered
            and self.subcarriers == other.subcarriers
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    """The aggregated detection feature, one value per window.

    Window k covers [window_starts[k], window_starts[k] + window_length).
    Windows holding fewer than two frames carry value 0.0 and valid=False.
    """

    window_starts: np.ndarray
    window_length: float
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        starts = np.asarray(self.window_starts, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if not starts.shape == values.shape == valid.shape:
            raise ConfigError("window_starts, values and valid must align")
        if self.window_length <= 0:
            raise ConfigError(f"window_length must be positive, got {self.window_length}")
        object.__setattr__(self, "window_starts", starts)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "FeatureSeries":
        return FeatureSeries(self.window_starts, self.window_length, values, self.valid)

    def equals(self, other: "FeatureSeries") -> bool:
        return (
            self.window_length == other.window_length
            and np.array_equal(self.window_starts, other.window_starts)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.valid, other.valid)
        )


def extract_amplitudes(
    doc: CaptureDocument,
    params: PipelineParams,
    device_filter=None,
) -> AmplitudeMatrix:
    """Stage 1: amplitudes of the configured subcarriers, frame by frame.

    ``device_filter`` keeps only frames from the named MACs (empty or None
    keeps everything).  Raises NoFramesError when nothing is left.
    """
    subcarriers = params.subcarriers
    if subcarriers is None:
        subcarriers = default_subcarrier_set(doc.bandwidth)
    if len(subcarriers) == 0:
        raise ConfigError("the pipeline needs at least one subcarrier")
    cols = subcarriers.columns(doc.fft_size)

    ts = doc.timestamps
    csi = doc.csi
    if device_filter:
        wanted = {str(d) for d in device_filter}
        mask = np.isin(doc.devices, sorted(wanted))
        if not mask.any():
            raise NoFramesError(
                f"no frames left after filtering for devices {sorted(wanted)}"
            )
        ts = ts[mask]
        csi = csi[mask]
    if ts.size == 0:
        raise NoFramesError("capture holds no frames")

    re = csi[:, cols, 0].astype(np.float64)
    im = csi[:, cols, 1].astype(np.float64)
    np.multiply(re, re, out=re)
    np.multiply(im, im, out=im)
    np.add(re, im, out=re)
    values = np.sqrt(re, out=re)
    return AmplitudeMatrix(ts, values, subcarriers, filtered=False)


@njit(cache=True)
def _filter_kernel(ts, vals, w1, lam, use_filtered):  # pragma: no cover
    n, k = vals.shape
    out = np.empty_like(vals)
    sums = np.zeros(k)
    sumsq = np.zeros(k)
    lo = 0
    hi = 0
    for j in range(n):
        t = ts[j]
        while hi < n and ts[hi] < t:
            row = out[hi] if use_filtered else vals[hi]
            for c in range(k):
                x = row[c]
                sums[c] += x
                sumsq[c] += x * x
            hi += 1
        edge = t - w1
        while lo < hi and ts[lo] < edge:
            row = out[lo] if use_filtered else vals[lo]
            for c in range(k):
                x = row[c]
                sums[c] -= x
                sumsq[c] -= x * x
            lo += 1
        m = hi - lo
        if m < 2:
            for c in range(k):
                out[j, c] = vals[j, c]
        else:
            inv = 1.0 / m
            for c in range(k):
                a = vals[j, c]
                mu = sums[c] * inv
                var = sumsq[c] * inv - mu * mu
                if var < 0.0:
                    var = 0.0
                sigma = math.sqrt(var)
                if sigma > 0.0:
                    keep = abs(a - mu) / sigma < lam
                else:
                    keep = a == mu
                out[j, c] = a if keep else out[j - 1, c]
    return out


def filter_outliers(m: AmplitudeMatrix, params: PipelineParams) -> AmplitudeMatrix:
    """Stage 2: trailing-window deviation filter, per subcarrier.

    For the frame at time t the window statistics (mean, population
    standard deviation) run over the values of the same subcarrier with
    timestamps in [t - w1, t).  A frame passes when the window holds
    fewer than two values, or when sigma > 0 and |A - mu| / sigma < lam,
    or when sigma == 0 and A == mu; otherwise its value is replaced by
    the immediately preceding filtered value of that subcarrier.  With
    params.filter_history == "filtered" (the default) the window runs
    over already-filtered values, with "raw" over the pristine input.
    """
    if m.n_frames == 0:
        raise NoFramesError("cannot filter an empty amplitude matrix")
    out = _filter_kernel(
        m.timestamps,
        np.ascontiguousarray(m.values),
        float(params.w1),
        float(params.lam),
        params.filter_history == "filtered",
    )
    return AmplitudeMatrix(m.timestamps, out, m.subcarriers, filtered=True)


def window_index(timestamps: np.ndarray, t0: float, w2: float) -> np.ndarray:
    """Window ids: k = floor((t - t0) / w2), the normative membership rule."""
    return np.floor((np.asarray(timestamps, dtype=np.float64) - t0) / w2).astype(np.intp)


def aggregate(
    m: AmplitudeMatrix,
    params: PipelineParams,
    *,
    allow_unfiltered: bool = False,
) -> FeatureSeries:
    """Stage 3: per-window mean over subcarriers of the population std.

    Windows are anchored at the first timestamp, length w2, non
    overlapping, and cover every frame through the last timestamp.
    Windows with fewer than two frames get value 0.0 and valid=False.
    Refuses unfiltered input unless ``allow_unfiltered`` is set (used by
    the storage study paths that evaluate the filter's absence).
    """
    if not m.filtered and not allow_unfiltered:
        raise ConfigError(
            "aggregate needs a filtered matrix; pass allow_unfiltered=True "
            "to aggregate raw amplitudes deliberately"
        )
    if m.n_frames == 0:
        raise NoFramesError("cannot aggregate an empty amplitude matrix")

    ts = m.timestamps
    w2 = float(params.w2)
    t0 = float(ts[0])
    ids = window_index(ts, t0, w2)
    n_windows = int(ids[-1]) + 1
    counts = np.bincount(ids, minlength=n_windows)

    # reduceat needs one boundary per non-empty window; scatter back after.
    nonempty = np.flatnonzero(counts)
    boundaries = np.concatenate(([0], np.cumsum(counts)[:-1]))[nonempty]
    sums = np.add.reduceat(m.values, boundaries, axis=0)
    mu = sums / counts[nonempty, None]
    centered = m.values - mu[np.searchsorted(nonempty, ids), :]
    np.multiply(centered, centered, out=centered)
    sqsums = np.add.reduceat(centered, boundaries, axis=0)
    sigma = np.sqrt(sqsums / counts[nonempty, None])

    values = np.zeros(n_windows, dtype=np.float64)
    ok = counts[nonempty] >= 2
    values[nonempty[ok]] = sigma[ok].mean(axis=1)
    valid = counts >= 2
    window_starts = t0 + np.arange(n_windows, dtype=np.float64) * w2
    return FeatureSeries(window_starts, w2, values, valid)


def run_pipeline(
    doc: CaptureDocument,
    params: PipelineParams,
    device_filter=None,
    *,
    apply_filter: bool = True,
    doc_hook=None,
    raw_hook=None,
    filtered_hook=None,
    feature_hook=None,
) -> FeatureSeries:
    """The full pipeline; hooks let callers splice in transforms between
    stages (the storage study uses them to quantize and reconstruct)."""
    if doc_hook is not None:
        doc = doc_hook(doc)
    m = extract_amplitudes(doc, params, device_filter)
    if raw_hook is not None:
        m = raw_hook(m)
    if apply_filter:
        m = filter_outliers(m, params)
    if filtered_hook is not None:
        m = filtered_hook(m)
    return_series = aggregate(m, params, allow_unfiltered=not apply_filter)
    if feature_hook is not None:
        return_series = feature_hook(return_series)
    return return_series


def write_features_csv(series: FeatureSeries, dest) -> None:
    """Export ``window_start,value,valid`` rows (valid as 1/0)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_features_csv(series, fh)
        return
    dest.write("window_start,value,valid\n")
    for start, value, ok in zip(series.window_starts, series.values, series.valid):
        dest.write(f"{start:.6f},{float(value)!r},{1 if ok else 0}\n")
