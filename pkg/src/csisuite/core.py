"""Core CSI domain types: device ids, frames, subcarrier sets, parameters.

A capture is a sequence of frames, one per received packet.  Each frame
carries one complex channel estimate per FFT bin; bins are addressed by
signed subcarrier index (-N/2 .. N/2-1 for an N-point FFT).  Analysis only
ever looks at a configured subset of those bins, never at index 0.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

INT16_MIN = -32768
INT16_MAX = 32767

DEFAULT_LAMBDA = 3.0
DEFAULT_W1 = 5.0
DEFAULT_W2 = 3.0
DEFAULT_OVERLAP_FRAC = 0.5

_MAC_RE = re.compile(r"^[0-9a-f]{2}(:[0-9a-f]{2}){5}$")


@dataclass(frozen=True, order=True)
class DeviceId:
    """A six-octet MAC address in canonical form.

    The canonical text form is six lowercase hex octets separated by
    colons, e.g. ``"aa:bb:cc:00:11:22"``.  Any other spelling (uppercase,
    dashes, missing octets) is rejected.
    """

    text: str

    def __post_init__(self) -> None:
        if not _MAC_RE.match(self.text):
            raise FormatError(f"not a canonical MAC address: {self.text!r}")

    def __str__(self) -> str:
        return self.text


def is_canonical_mac(text: str) -> bool:
    """True if ``text`` is a canonical lowercase colon-separated MAC."""
    return bool(_MAC_RE.match(text))


@dataclass(frozen=True)
class ComplexSample:
    """One CSI value: a complex channel estimate with int16 components."""

    real: int
    imag: int

    def __post_init__(self) -> None:
        for name, value in (("real", self.real), ("imag", self.imag)):
            if not isinstance(value, (int, np.integer)):
                raise FormatError(f"{name} component must be an integer, got {value!r}")
            if not INT16_MIN <= value <= INT16_MAX:
                raise FormatError(f"{name} component {value} outside int16 range")


@dataclass(frozen=True)
class CsiFrame:
    """One received packet: timestamp, transmitter, and per-bin CSI.

    ``csi`` holds one ComplexSample per FFT bin in ascending subcarrier
    index order, so ``csi[0]`` is index -N/2 and ``csi[N-1]`` is N/2-1.
    Timestamps are seconds with microsecond precision.
    """

    timestamp: float
    device: DeviceId
    csi: tuple[ComplexSample, ...]

    def __post_init__(self) -> None:
        if len(self.csi) == 0:
            raise FormatError("frame carries no CSI values")
        if not math.isfinite(self.timestamp) or self.timestamp < 0.0:
            raise FormatError(
                f"timestamp must be finite and non-negative, got {self.timestamp!r}"
            )


@dataclass(frozen=True)
class SubcarrierSet:
    """A sorted set of signed subcarrier indices used by the analysis.

    Index 0 (the DC bin) is never part of a valid set.  Construction
    sorts and deduplicates, so callers may pass indices in any order.
    """

    indices: tuple[int, ...]

    def __init__(self, indices) -> None:
        normalized = tuple(sorted({int(i) for i in indices}))
        if 0 in normalized:
            raise ConfigError("subcarrier set must not contain index 0")
        object.__setattr__(self, "indices", normalized)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def validate_for(self, fft_size: int) -> None:
        """Raise if any index falls outside the FFT bin range."""
        lo, hi = -fft_size // 2, fft_size // 2 - 1
        bad = [i for i in self.indices if i < lo or i > hi]
        if bad:
            raise ConfigError(
                f"subcarrier indices {bad} outside [{lo}, {hi}] for FFT size {fft_size}"
            )

    def columns(self, fft_size: int) -> np.ndarray:
        """Column positions of the set inside an ascending-index frame row."""
        self.validate_for(fft_size)
        return np.asarray([i + fft_size // 2 for i in self.indices], dtype=np.intp)


@dataclass(frozen=True)
class PipelineParams:
    """Knobs of the amplitude pipeline.

    lam is the deviation threshold of the outlier filter (in standard
    deviations), w1 the trailing filter window in seconds, w2 the
    aggregation window in seconds, overlap_frac the fraction of w2 an
    activity interval must cover for a window to be labeled positive.
    filter_history selects what the filter window statistics are computed
    over: "filtered" replays already-cleaned values (in-place semantics),
    "raw" uses the pristine input values.
    """

    lam: float = DEFAULT_LAMBDA
    w1: float = DEFAULT_W1
    w2: float = DEFAULT_W2
    subcarriers: SubcarrierSet | None = None
    overlap_frac: float = DEFAULT_OVERLAP_FRAC
    filter_history: str = "filtered"

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if self.w1 <= 0:
            raise ConfigError(f"w1 must be positive, got {self.w1}")
        if self.w2 <= 0:
            raise ConfigError(f"w2 must be positive, got {self.w2}")
        if not 0.0 <= self.overlap_frac <= 1.0:
            raise ConfigError(f"overlap_frac must be in [0, 1], got {self.overlap_frac}")
        if self.filter_history not in ("filtered", "raw"):
            raise ConfigError(
                f"filter_history must be 'filtered' or 'raw', got {self.filter_history!r}"
            )


def load_params(path: str | Path) -> PipelineParams:
    """Read PipelineParams from a JSON file.

    Recognized keys: lambda, w1, w2, overlap_frac, filter_history,
    subcarriers (a list of indices).  Missing keys keep their defaults;
    unknown keys are rejected.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    known = {"lambda", "w1", "w2", "overlap_frac", "filter_history", "subcarriers"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown parameter keys {sorted(unknown)}")
    kwargs = {}
    if "lambda" in raw:
        kwargs["lam"] = float(raw["lambda"])
    for key in ("w1", "w2", "overlap_frac"):
        if key in raw:
            kwargs[key] = float(raw[key])
    if "filter_history" in raw:
        kwargs["filter_history"] = raw["filter_history"]
    if "subcarriers" in raw:
        kwargs["subcarriers"] = SubcarrierSet(raw["subcarriers"])
    return PipelineParams(**kwargs)


def amplitude(sample: ComplexSample) -> float:
    """Amplitude of one CSI value, sqrt(real**2 + imag**2)."""
    return math.sqrt(sample.real * sample.real + sample.imag * sample.imag)


def frame_amplitudes(frame: CsiFrame, subcarriers: SubcarrierSet) -> np.ndarray:
    """Amplitudes of the selected subcarriers of one frame.

    Parameters
    ----------
    frame : CsiFrame
        Source frame; its length fixes the FFT size.
    subcarriers : SubcarrierSet
        Indices to extract, returned in ascending index order.

    Returns
    -------
    np.ndarray
        Float64 vector, one amplitude per selected subcarrier.

    Raises
    ------
    ConfigError
        If an index falls outside the frame's FFT bin range.
    """
    fft_size = len(frame.csi)
    cols = subcarriers.columns(fft_size)
    out = np.empty(len(cols), dtype=np.float64)
    for j, col in enumerate(cols):
        s = frame.csi[col]
        out[j] = math.sqrt(s.real * s.real + s.imag * s.imag)
    return out


# --- format registry -------------------------------------------------------

@dataclass(frozen=True)
class BandwidthFormat:
    """Frame layout for one channel bandwidth."""

    bandwidth: int
    fft_size: int
    usable: SubcarrierSet


class FormatRegistry:
    """Bandwidth to frame-layout mapping, loaded from a key/value file."""

    def __init__(self, version: int, formats: dict[int, BandwidthFormat]):
        self.version = version
        self._formats = dict(formats)

    def bandwidths(self) -> tuple[int, ...]:
        return tuple(sorted(self._formats))

    def get(self, bandwidth: int) -> BandwidthFormat:
        try:
            return self._formats[bandwidth]
        except KeyError:
            raise ConfigError(
                f"unknown bandwidth {bandwidth} MHz, registry has {self.bandwidths()}"
            ) from None

    def by_fft_size(self, fft_size: int) -> BandwidthFormat:
        for fmt in self._formats.values():
            if fmt.fft_size == fft_size:
                return fmt
        raise FormatError(f"no registered bandwidth uses FFT size {fft_size}")


def _parse_index_ranges(text: str) -> list[int]:
    indices: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo_text, hi_text = part.split("..", 1)
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ConfigError(f"bad index range {part!r}")
            indices.extend(range(lo, hi + 1))
        else:
            indices.append(int(part))
    return indices


def load_registry(path: str | Path) -> FormatRegistry:
    """Parse a format registry file.

    The file is line oriented ``key = value`` text; ``#`` starts a
    comment.  Keys are ``version`` and ``bandwidth.<mhz>.fft_size`` /
    ``bandwidth.<mhz>.usable``.
    """
    entries: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in entries:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            entries[key] = value

    version = int(entries.pop("version", "1"))
    grouped: dict[int, dict[str, str]] = {}
    for key, value in entries.items():
        parts = key.split(".")
        if len(parts) != 3 or parts[0] != "bandwidth":
            raise ConfigError(f"{path}: unrecognized key {key!r}")
        grouped.setdefault(int(parts[1]), {})[parts[2]] = value

    formats: dict[int, BandwidthFormat] = {}
    for bandwidth, fields in sorted(grouped.items()):
        missing = {"fft_size", "usable"} - set(fields)
        if missing:
            raise ConfigError(f"{path}: bandwidth {bandwidth} missing {sorted(missing)}")
        fft_size = int(fields["fft_size"])
        usable = SubcarrierSet(_parse_index_ranges(fields["usable"]))
        usable.validate_for(fft_size)
        formats[bandwidth] = BandwidthFormat(bandwidth, fft_size, usable)
    if not formats:
        raise ConfigError(f"{path}: registry defines no bandwidths")
    return FormatRegistry(version, formats)


_default_registry: FormatRegistry | None = None


def default_registry() -> FormatRegistry:
    """The registry shipped with the package, loaded once."""
    global _default_registry
    if _default_registry is None:
        with resources.as_file(
            resources.files("csisuite.data").joinpath("formats.cfg")
        ) as path:
            _default_registry = load_registry(path)
    return _default_registry


def default_subcarrier_set(bandwidth: int) -> SubcarrierSet:
    """The usable subcarrier set registered for ``bandwidth`` MHz."""
    return default_registry().get(bandwidth).usable


def fft_size_for(bandwidth: int) -> int:
    """The FFT size registered for ``bandwidth`` MHz."""
    return default_registry().get(bandwidth).fft_size
