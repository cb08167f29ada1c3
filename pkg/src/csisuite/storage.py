"""Storage versus accuracy studies: frame decimation and lossy encoding.

Two independent knobs trade capture size against detection quality:

* decimation keeps every f-th frame per device before any analysis;
* scalar quantization stores one of the pipeline's intermediate products
  at B bits per value and reconstructs it before the remaining stages.

The four quantization stages are (1) raw complex components, (2) raw
amplitudes of the analysis subcarriers, (3) filtered amplitudes, and
(4) the aggregated feature itself.  Baseline storage counts sample
payloads only: four bytes per raw complex value (two int16 components)
for stage 1, four bytes per float32 value for the later stages.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import quantfile
from .capture_io import CaptureDocument
from .core import PipelineParams, default_subcarrier_set
from .detector import GroundTruth, auc, label_windows, roc
from .errors import ConfigError, NoFramesError
from .pipeline import (
    AmplitudeMatrix,
    FeatureSeries,
    aggregate,
    extract_amplitudes,
    filter_outliers,
)

RATE_GRID = tuple(range(1, 26)) + (50,)
BITS_GRID = tuple(range(2, 17))
STAGES = (1, 2, 3, 4)


def decimate(doc: CaptureDocument, f: int) -> CaptureDocument:
    """Keep every f-th frame per device (arrival ranks 0, f, 2f, ...).

    Ranks are counted per device in document order, so interleaved
    devices are thinned independently.  f=1 returns an equal document.
    """
    if not isinstance(f, (int, np.integer)) or f < 1:
        raise ConfigError(f"decimation factor must be a positive integer, got {f}")
    if f == 1:
        return doc
    keep = np.zeros(doc.n_frames, dtype=bool)
    for device in doc.device_set():
        positions = np.flatnonzero(doc.devices == device)
        keep[positions[::f]] = True
    return doc.take(np.flatnonzero(keep))


def quantize_stage(x, stage: int, bits: int, *, ranges=None) -> tuple[bytes, object]:
    """Quantize one pipeline product at B bits.

    Parameters
    ----------
    x : CaptureDocument (stage 1), raw AmplitudeMatrix (stage 2),
        filtered AmplitudeMatrix (stage 3), or FeatureSeries (stage 4).
    stage, bits : which product, and the code width (2..16).
    ranges : optional per-stream (v_min, v_max) overrides; the default is
        each stream's own global min and max.

    Returns
    -------
    (container_bytes, reconstruction)
        The serialized container and the dequantized object of the same
        type as ``x``, ready for the remaining pipeline stages.
    """
    if bits not in BITS_GRID:
        raise ConfigError(f"bits must be in [2, 16], got {bits}")
    if stage == 1:
        if not isinstance(x, CaptureDocument):
            raise ConfigError("stage 1 quantizes a CaptureDocument")
        re = x.csi[:, :, 0]
        im = x.csi[:, :, 1]
        blob = quantfile.write_quant(
            [re, im], stage, bits,
            bandwidth=x.bandwidth,
            n_frames=x.n_frames,
            n_columns=x.fft_size,
            ranges=ranges,
        )
        container = quantfile.read_quant(blob)
        deq = container.dequantized()
        csi = np.stack(
            [
                deq[0].reshape(x.n_frames, x.fft_size),
                deq[1].reshape(x.n_frames, x.fft_size),
            ],
            axis=2,
        )
        return blob, x.with_csi(csi)
    if stage in (2, 3):
        if not isinstance(x, AmplitudeMatrix):
            raise ConfigError(f"stage {stage} quantizes an AmplitudeMatrix")
        if stage == 2 and x.filtered:
            raise ConfigError("stage 2 stores raw amplitudes, got a filtered matrix")
        if stage == 3 and not x.filtered:
            raise ConfigError("stage 3 stores filtered amplitudes, got a raw matrix")
        blob = quantfile.write_quant(
            [x.values], stage, bits,
            bandwidth=_bandwidth_of(x),
            n_frames=x.n_frames,
            n_columns=len(x.subcarriers),
            ranges=ranges,
        )
        container = quantfile.read_quant(blob)
        values = container.dequantized()[0].reshape(x.values.shape)
        return blob, AmplitudeMatrix(x.timestamps, values, x.subcarriers, x.filtered)
    if stage == 4:
        if not isinstance(x, FeatureSeries):
            raise ConfigError("stage 4 quantizes a FeatureSeries")
        blob = quantfile.write_quant(
            [x.values], stage, bits,
            bandwidth=0,
            n_windows=x.n_windows,
            t0=float(x.window_starts[0]) if x.n_windows else 0.0,
            w2=x.window_length,
            ranges=ranges,
        )
        container = quantfile.read_quant(blob)
        return blob, x.with_values(container.dequantized()[0])
    raise ConfigError(f"stage must be 1..4, got {stage}")


def _restrict_devices(doc: CaptureDocument, device_filter) -> CaptureDocument:
    if not device_filter:
        return doc
    wanted = sorted({str(d) for d in device_filter})
    mask = np.isin(doc.devices, wanted)
    if not mask.any():
        raise NoFramesError(f"no frames left after filtering for devices {wanted}")
    return doc.take(np.flatnonzero(mask))


def _bandwidth_of(m: AmplitudeMatrix) -> int:
    # best effort: matrices do not carry bandwidth, try the registry
    from .core import default_registry

    for bw in default_registry().bandwidths():
        if default_registry().get(bw).usable == m.subcarriers:
            return bw
    return 0


def storage_bytes(
    stage: int,
    bits: int,
    *,
    n_frames: int = 0,
    fft_size: int = 0,
    n_subcarriers: int = 0,
    n_windows: int = 0,
) -> tuple[int, int]:
    """(stored, baseline) byte counts for one (stage, bits) cell.

    Baselines: stage 1 stores n_frames * fft_size complex values at four
    bytes each; stages 2 and 3 store n_frames * n_subcarriers float32
    amplitudes; stage 4 stores n_windows float32 features.  The quantized
    size is ceil(count * bits / 8) plus the fixed container header, where
    count doubles for stage 1 (separate real and imaginary streams).
    """
    if stage == 1:
        baseline = n_frames * fft_size * 4
        count = 2 * n_frames * fft_size
    elif stage in (2, 3):
        baseline = n_frames * n_subcarriers * 4
        count = n_frames * n_subcarriers
    elif stage == 4:
        baseline = n_windows * 4
        count = n_windows
    else:
        raise ConfigError(f"stage must be 1..4, got {stage}")
    stored = (count * bits + 7) // 8 + quantfile.header_size(stage)
    return stored, baseline


@dataclass(frozen=True)
class SweepRow:
    """One grid cell of a storage study."""

    stage: int
    bits_or_f: int
    auc: float
    stored_bytes: int
    baseline_bytes: int
    ratio: float
    eff_rate: float | None = None


@dataclass(frozen=True)
class SweepReport:
    """All grid cells of one study, in deterministic grid order."""

    kind: str  # "quant" or "rate"
    rows: tuple[SweepRow, ...]

    def row(self, stage: int, bits_or_f: int) -> SweepRow:
        for r in self.rows:
            if r.stage == stage and r.bits_or_f == bits_or_f:
                return r
        raise KeyError((stage, bits_or_f))


def run_quant_sweep(
    doc: CaptureDocument,
    truth: GroundTruth,
    params: PipelineParams,
    *,
    stages=STAGES,
    bits_grid=BITS_GRID,
    device_filter=None,
) -> SweepReport:
    """AUC and storage cost for every (stage, bits) cell.

    The capture is pushed through the pipeline once; each cell then
    quantizes the appropriate intermediate product, reconstructs it, and
    reruns only the remaining stages before evaluating the ROC area.
    Rows are ordered stage-major, bits ascending.
    """
    doc = _restrict_devices(doc, device_filter)
    raw = extract_amplitudes(doc, params)
    filtered = filter_outliers(raw, params)
    series = aggregate(filtered, params)
    # quantization never moves timestamps, so the window grid and labels
    # are the same in every cell
    labels = label_windows(truth, series, params.overlap_frac)

    rows = []
    for stage in stages:
        for bits in bits_grid:
            if stage == 1:
                _, deq_doc = quantize_stage(doc, 1, bits)
                s = aggregate(
                    filter_outliers(extract_amplitudes(deq_doc, params), params),
                    params,
                )
            elif stage == 2:
                _, deq = quantize_stage(raw, 2, bits)
                s = aggregate(filter_outliers(deq, params), params)
            elif stage == 3:
                _, deq = quantize_stage(filtered, 3, bits)
                s = aggregate(deq, params)
            else:
                _, s = quantize_stage(series, 4, bits)
            area = auc(roc(s, labels))
            stored, baseline = storage_bytes(
                stage, bits,
                n_frames=raw.n_frames,
                fft_size=doc.fft_size,
                n_subcarriers=len(raw.subcarriers),
                n_windows=series.n_windows,
            )
            rows.append(
                SweepRow(stage, bits, area, stored, baseline, stored / baseline)
            )
    return SweepReport("quant", tuple(rows))


def run_rate_sweep(
    doc: CaptureDocument,
    truth: GroundTruth,
    params: PipelineParams,
    *,
    grid=RATE_GRID,
    device_filter=None,
) -> SweepReport:
    """AUC versus decimation factor over the fixed grid.

    Storage accounting uses raw frame payloads (stage 1 baseline): the
    stored size is the retained frames' share of the baseline.  Each row
    carries the effective packet rate, retained frames divided by the
    original capture duration.
    """
    doc = _restrict_devices(doc, device_filter)
    if doc.n_frames < 2:
        raise NoFramesError("rate sweep needs at least two frames")
    duration = float(doc.timestamps[-1] - doc.timestamps[0])
    if duration <= 0:
        raise ConfigError("capture duration is zero, cannot compute rates")
    rows = []
    for f in grid:
        thinned = decimate(doc, int(f))
        m = extract_amplitudes(thinned, params)
        series = aggregate(filter_outliers(m, params), params)
        labels = label_windows(truth, series, params.overlap_frac)
        area = auc(roc(series, labels))
        stored = m.n_frames * doc.fft_size * 4
        baseline = doc.n_frames * doc.fft_size * 4
        rows.append(
            SweepRow(
                1, int(f), area, stored, baseline, stored / baseline,
                eff_rate=m.n_frames / duration,
            )
        )
    return SweepReport("rate", tuple(rows))


def write_sweep_csv(report: SweepReport, dest) -> None:
    """Export a sweep as CSV; rate sweeps add a trailing eff_rate column."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(report, fh)
        return
    header = "stage,bits_or_f,auc,stored_bytes,baseline_bytes,ratio"
    rate_sweep = report.kind == "rate"
    if rate_sweep:
        header += ",eff_rate"
    dest.write(header + "\n")
    for r in report.rows:
        line = (
            f"{r.stage},{r.bits_or_f},{r.auc:.6f},{r.stored_bytes},"
            f"{r.baseline_bytes},{r.ratio:.6f}"
        )
        if rate_sweep:
            line += f",{r.eff_rate:.6f}"
        dest.write(line + "\n")


def format_sweep_table(report: SweepReport) -> str:
    """Human-readable fixed-width rendering of a sweep report."""
    knob = "f" if report.kind == "rate" else "bits"
    header = f"{'stage':>5}  {knob:>4}  {'auc':>8}  {'stored':>12}  {'baseline':>12}  {'ratio':>7}"
    if report.kind == "rate":
        header += f"  {'pkts/s':>8}"
    lines = [header]
    for r in report.rows:
        line = (
            f"{r.stage:>5}  {r.bits_or_f:>4}  {r.auc:>8.4f}  "
            f"{r.stored_bytes:>12}  {r.baseline_bytes:>12}  {r.ratio:>7.4f}"
        )
        if report.kind == "rate":
            line += f"  {r.eff_rate:>8.3f}"
        lines.append(line)
    return "\n".join(lines) + "\n"
