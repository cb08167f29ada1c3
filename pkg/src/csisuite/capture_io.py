"""Capture documents and the delimited capture format.

A capture file is plain CSV with a fixed header::

    ts,mac,re_-32,im_-32,re_-31,im_-31,...,re_31,im_31

One row per frame, ascending subcarrier index covering the full FFT bin
range of the bandwidth.  Timestamps are printed with six decimal places
(microsecond precision), MACs in canonical lowercase form, components as
plain integers.  Lines starting with ``#`` are comments; a ``# config:
<name>`` comment records which capture configuration produced the file.
Writing a parsed document reproduces the canonical bytes exactly.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    CsiFrame,
    ComplexSample,
    DeviceId,
    INT16_MAX,
    INT16_MIN,
    default_registry,
    is_canonical_mac,
)
from .errors import FormatError, NoFramesError

CONFIG_COMMENT = "# config: "


@dataclass(frozen=True, eq=False)
class CaptureDocument:
    """An ordered sequence of frames from one capture.

    Frames are ordered by (timestamp, arrival order); ``csi`` has shape
    (n_frames, fft_size, 2) with real parts in ``[..., 0]`` and imaginary
    parts in ``[..., 1]``.  Canonical captures hold integer components;
    float components appear only on analysis-internal documents (for
    example after lossy reconstruction) and cannot be written back to CSV.
    """

    timestamps: np.ndarray
    devices: np.ndarray
    csi: np.ndarray
    bandwidth: int
    source_config: str | None = None

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.float64)
        devices = np.asarray(self.devices)
        csi = np.asarray(self.csi)
        if csi.ndim != 3 or csi.shape[2] != 2:
            raise FormatError(f"csi must have shape (n, fft, 2), got {csi.shape}")
        n = csi.shape[0]
        if ts.shape != (n,) or devices.shape != (n,):
            raise FormatError(
                f"inconsistent lengths: {ts.shape[0]} timestamps, "
                f"{devices.shape[0]} devices, {n} frames"
            )
        if n and np.any(np.diff(ts) < 0):
            raise FormatError("timestamps must be non-decreasing")
        fmt = default_registry().get(self.bandwidth)
        if csi.shape[1] != fmt.fft_size:
            raise FormatError(
                f"{csi.shape[1]} bins per frame, expected {fmt.fft_size} "
                f"for {self.bandwidth} MHz"
            )
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "devices", devices)
        object.__setattr__(self, "csi", csi)

    @property
    def n_frames(self) -> int:
        return self.csi.shape[0]

    @property
    def fft_size(self) -> int:
        return self.csi.shape[1]

    def device_set(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.devices.tolist())))

    def frame(self, i: int) -> CsiFrame:
        """Materialize one frame as a CsiFrame (integer documents only)."""
        row = self.csi[i]
        if not np.all(row == np.trunc(row)):
            raise FormatError("document holds non-integer CSI, cannot build frames")
        samples = tuple(
            ComplexSample(int(row[c, 0]), int(row[c, 1])) for c in range(row.shape[0])
        )
        return CsiFrame(float(self.timestamps[i]), DeviceId(str(self.devices[i])), samples)

    def take(self, indices) -> "CaptureDocument":
        """Sub-document with the given frame positions, order preserved."""
        idx = np.asarray(indices, dtype=np.intp)
        return CaptureDocument(
            self.timestamps[idx],
            self.devices[idx],
            self.csi[idx],
            self.bandwidth,
            self.source_config,
        )

    def with_csi(self, csi: np.ndarray) -> "CaptureDocument":
        """Same frames, different component values (same shape)."""
        return CaptureDocument(
            self.timestamps, self.devices, csi, self.bandwidth, self.source_config
        )

    def equals(self, other: "CaptureDocument") -> bool:
        return (
            self.bandwidth == other.bandwidth
            and self.source_config == other.source_config
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.devices, other.devices)
            and np.array_equal(self.csi, other.csi)
        )

    @classmethod
    def from_frames(
        cls,
        frames,
        bandwidth: int | None = None,
        source_config: str | None = None,
    ) -> "CaptureDocument":
        frames = list(frames)
        if not frames:
            raise NoFramesError("cannot build a document from zero frames")
        fft_size = len(frames[0].csi)
        if bandwidth is None:
            bandwidth = default_registry().by_fft_size(fft_size).bandwidth
        n = len(frames)
        ts = np.empty(n, dtype=np.float64)
        devices = np.empty(n, dtype="<U17")
        csi = np.empty((n, fft_size, 2), dtype=np.int16)
        for i, frame in enumerate(frames):
            if len(frame.csi) != fft_size:
                raise FormatError(
                    f"frame {i} has {len(frame.csi)} bins, expected {fft_size}"
                )
            ts[i] = frame.timestamp
            devices[i] = frame.device.text
            for c, sample in enumerate(frame.csi):
                csi[i, c, 0] = sample.real
                csi[i, c, 1] = sample.imag
        return cls(ts, devices, csi, bandwidth, source_config)


def capture_header(fft_size: int) -> str:
    """The canonical header line for an ``fft_size``-bin capture."""
    half = fft_size // 2
    cols = ["ts", "mac"]
    for i in range(-half, half):
        cols.append(f"re_{i}")
        cols.append(f"im_{i}")
    return ",".join(cols)


def format_frame_row(timestamp: float, device: str, components) -> str:
    """One canonical CSV row; ``components`` is the flat re/im sequence."""
    return f"{timestamp:.6f},{device}," + ",".join(str(int(v)) for v in components)


def parse_capture_csv(source) -> CaptureDocument:
    """Parse a capture file.

    Parameters
    ----------
    source : path, str of file content is not accepted; pass a path or a
        text file object opened for reading.

    Returns
    -------
    CaptureDocument
        Bandwidth inferred from the column count via the format registry.

    Raises
    ------
    FormatError
        Naming the 1-based line number for any malformed row: wrong column
        count, bad timestamp, non-canonical MAC, non-integer or out of
        range component, or timestamps out of order.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return parse_capture_csv(fh)

    header = None
    fft_size = 0
    n_cols = 0
    source_config = None
    timestamps: list[float] = []
    devices: list[str] = []
    rows: list[np.ndarray] = []
    prev_ts = -np.inf

    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(CONFIG_COMMENT) and source_config is None:
                source_config = line[len(CONFIG_COMMENT):].strip()
            continue
        if header is None:
            header = line
            fields = line.split(",")
            if len(fields) < 4 or (len(fields) - 2) % 2 != 0:
                raise FormatError(f"line {lineno}: malformed capture header")
            fft_size = (len(fields) - 2) // 2
            if line != capture_header(fft_size):
                raise FormatError(f"line {lineno}: non-canonical capture header")
            default_registry().by_fft_size(fft_size)  # unknown size -> error
            n_cols = len(fields)
            continue
        fields = line.split(",")
        if len(fields) != n_cols:
            raise FormatError(
                f"line {lineno}: {len(fields)} columns, expected {n_cols}"
            )
        try:
            ts = float(fields[0])
        except ValueError:
            raise FormatError(f"line {lineno}: bad timestamp {fields[0]!r}") from None
        if not np.isfinite(ts) or ts < 0.0:
            raise FormatError(f"line {lineno}: bad timestamp {fields[0]!r}")
        if ts < prev_ts:
            raise FormatError(f"line {lineno}: timestamps out of order")
        prev_ts = ts
        mac = fields[1]
        if not is_canonical_mac(mac):
            raise FormatError(f"line {lineno}: non-canonical MAC {mac!r}")
        try:
            comps = np.array([int(v) for v in fields[2:]], dtype=np.int32)
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer CSI component") from None
        if comps.min() < INT16_MIN or comps.max() > INT16_MAX:
            raise FormatError(f"line {lineno}: CSI component outside int16 range")
        timestamps.append(ts)
        devices.append(mac)
        rows.append(comps.astype(np.int16))

    if header is None:
        raise FormatError("capture file has no header line")

    n = len(rows)
    csi = (
        np.stack(rows).reshape(n, fft_size, 2)
        if n
        else np.empty((0, fft_size, 2), dtype=np.int16)
    )
    return CaptureDocument(
        np.asarray(timestamps, dtype=np.float64),
        np.asarray(devices, dtype="<U17"),
        csi,
        default_registry().by_fft_size(fft_size).bandwidth,
        source_config,
    )


def write_capture_csv(doc: CaptureDocument, dest) -> None:
    """Write a document in canonical form (path or text file object).

    Only integer-component documents can be serialized; analysis-internal
    float documents have no canonical text form.
    """
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_capture_csv(doc, fh)
        return
    csi = doc.csi
    if csi.dtype.kind not in "iu":
        if not np.all(csi == np.trunc(csi)):
            raise FormatError("document holds non-integer CSI, cannot serialize")
        csi = csi.astype(np.int64)
    if doc.source_config is not None:
        dest.write(f"{CONFIG_COMMENT}{doc.source_config}\n")
    dest.write(capture_header(doc.fft_size) + "\n")
    flat = csi.reshape(doc.n_frames, 2 * doc.fft_size)
    for i in range(doc.n_frames):
        dest.write(format_frame_row(doc.timestamps[i], str(doc.devices[i]), flat[i]))
        dest.write("\n")


def capture_csv_text(doc: CaptureDocument) -> str:
    """The canonical file content as one string."""
    buf = io.StringIO()
    write_capture_csv(doc, buf)
    return buf.getvalue()
