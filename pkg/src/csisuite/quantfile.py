"""Lossy storage containers: scalar quantization plus bit packing.

Quantization maps a value v with stream range [v_min, v_max] onto B-bit
codes::

    code = round((v - v_min) / (v_max - v_min) * (2**B - 1))

Values outside the range are clamped first.  Rounding is half away from
zero, computed as ``floor(x) + (x - floor(x) >= 0.5)`` on the non-negative
normalized value, which makes payloads bit-exact across implementations.
A degenerate range (v_max == v_min) maps everything to code 0 and
reconstructs to v_min.

Container layout (all integers big-endian)::

    offset  size  field
    0       4     magic "CSIQ"
    4       1     format version (1)
    5       1     stage (1..4)
    6       1     bits per code (1..16)
    7       1     stream count (1..2)
    8       2     bandwidth, MHz (u16)
    10      8     frame count (u64, stages 1..3, else 0)
    18      4     columns per frame (u32; stage 1: FFT size, 2/3: set size)
    22      8     window count (u64, stage 4, else 0)
    30      8     first window start, seconds (f64, stage 4, else 0)
    38      8     window length, seconds (f64, stage 4, else 0)
    46      16*S  per stream: v_min (f64), v_max (f64)
    46+16S  ...   payload

The payload packs every code most-significant-bit first, streams
concatenated in order, zero-padded to a byte boundary.  Stage 1 stores two
streams (all real components, then all imaginary components); stages 2..4
store one.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

MAGIC = b"CSIQ"
VERSION = 1
_HEADER = struct.Struct(">4sBBBBHQIQdd")
_RANGE = struct.Struct(">dd")

STREAMS_PER_STAGE = {1: 2, 2: 1, 3: 1, 4: 1}

# Chunk size for the bit matrix passes; a multiple of 8 values keeps every
# chunk boundary on a whole byte for any bit width.
_CHUNK = 1 << 22


def quantize(values, v_min: float, v_max: float, bits: int) -> np.ndarray:
    """Map values onto B-bit codes per the pinned rounding rule."""
    _check_bits(bits)
    if not (np.isfinite(v_min) and np.isfinite(v_max)) or v_max < v_min:
        raise FormatError(f"bad quantization range [{v_min}, {v_max}]")
    values = np.asarray(values, dtype=np.float64)
    if v_max == v_min:
        return np.zeros(values.shape, dtype=np.uint32)
    levels = (1 << bits) - 1
    x = (np.clip(values, v_min, v_max) - v_min) / (v_max - v_min) * levels
    whole = np.floor(x)
    return (whole + (x - whole >= 0.5)).astype(np.uint32)


def dequantize(codes, v_min: float, v_max: float, bits: int) -> np.ndarray:
    """Reconstruct the level value of each code."""
    _check_bits(bits)
    codes = np.asarray(codes)
    levels = (1 << bits) - 1
    return v_min + codes.astype(np.float64) / levels * (v_max - v_min)


def _check_bits(bits: int) -> None:
    if not 1 <= bits <= 16:
        raise FormatError(f"bits must be in [1, 16], got {bits}")


def pack_codes(codes, bits: int) -> bytes:
    """Pack codes MSB-first into bytes, zero-padded at the end."""
    _check_bits(bits)
    codes = np.ascontiguousarray(codes, dtype=np.uint32)
    if codes.size == 0:
        return b""
    if int(codes.max()) >> bits:
        raise FormatError(f"code does not fit in {bits} bits")
    parts = []
    for start in range(0, codes.size, _CHUNK):
        chunk = codes[start:start + _CHUNK]
        octets = chunk.astype(">u4").view(np.uint8).reshape(-1, 4)
        bit_rows = np.unpackbits(octets, axis=1)[:, 32 - bits:]
        parts.append(np.packbits(bit_rows.reshape(-1)).tobytes())
    return b"".join(parts)


def unpack_codes(payload: bytes, count: int, bits: int) -> np.ndarray:
    """Inverse of pack_codes for a known value count."""
    _check_bits(bits)
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    need_bits = count * bits
    if len(payload) * 8 < need_bits:
        raise FormatError(
            f"payload holds {len(payload) * 8} bits, need {need_bits}"
        )
    out = np.empty(count, dtype=np.uint32)
    weights = (1 << np.arange(bits - 1, -1, -1, dtype=np.uint32))
    raw = np.frombuffer(payload, dtype=np.uint8)
    for start in range(0, count, _CHUNK):
        n = min(_CHUNK, count - start)
        byte_lo = start * bits // 8
        byte_hi = (start + n) * bits + 7 >> 3
        bits_arr = np.unpackbits(raw[byte_lo:byte_hi])[: n * bits]
        out[start:start + n] = bits_arr.reshape(n, bits).astype(np.uint32) @ weights
    return out


@dataclass(frozen=True, eq=False)
class QuantContainer:
    """A parsed container: header fields plus per-stream code arrays."""

    stage: int
    bits: int
    bandwidth: int
    n_frames: int
    n_columns: int
    n_windows: int
    t0: float
    w2: float
    ranges: tuple[tuple[float, float], ...]
    codes: tuple[np.ndarray, ...]

    @property
    def n_streams(self) -> int:
        return len(self.ranges)

    def values_per_stream(self) -> int:
        if self.stage == 4:
            return self.n_windows
        return self.n_frames * self.n_columns

    def dequantized(self) -> list[np.ndarray]:
        """Reconstructed float64 values, one array per stream."""
        return [
            dequantize(c, lo, hi, self.bits)
            for c, (lo, hi) in zip(self.codes, self.ranges)
        ]

    def equals(self, other: "QuantContainer") -> bool:
        return encode_quant(self) == encode_quant(other)


def write_quant(
    streams,
    stage: int,
    bits: int,
    *,
    bandwidth: int,
    n_frames: int = 0,
    n_columns: int = 0,
    n_windows: int = 0,
    t0: float = 0.0,
    w2: float = 0.0,
    ranges=None,
) -> bytes:
    """Quantize the given value streams and encode a container.

    ``ranges`` overrides the per-stream (v_min, v_max); by default each
    stream uses its own global min and max.
    """
    if stage not in STREAMS_PER_STAGE:
        raise FormatError(f"stage must be 1..4, got {stage}")
    streams = [np.asarray(s, dtype=np.float64).ravel() for s in streams]
    if len(streams) != STREAMS_PER_STAGE[stage]:
        raise FormatError(
            f"stage {stage} stores {STREAMS_PER_STAGE[stage]} streams, "
            f"got {len(streams)}"
        )
    expected = n_windows if stage == 4 else n_frames * n_columns
    for s in streams:
        if s.size != expected:
            raise FormatError(
                f"stream holds {s.size} values, header promises {expected}"
            )
    if ranges is None:
        ranges = tuple(
            (float(s.min()), float(s.max())) if s.size else (0.0, 0.0)
            for s in streams
        )
    else:
        ranges = tuple((float(lo), float(hi)) for lo, hi in ranges)
    codes = tuple(
        quantize(s, lo, hi, bits) for s, (lo, hi) in zip(streams, ranges)
    )
    return encode_quant(
        QuantContainer(
            stage, bits, bandwidth, n_frames, n_columns, n_windows, t0, w2,
            ranges, codes,
        )
    )


def encode_quant(container: QuantContainer) -> bytes:
    """Serialize a container to bytes."""
    c = container
    _check_bits(c.bits)
    head = _HEADER.pack(
        MAGIC, VERSION, c.stage, c.bits, c.n_streams, c.bandwidth,
        c.n_frames, c.n_columns, c.n_windows, c.t0, c.w2,
    )
    parts = [head]
    for lo, hi in c.ranges:
        parts.append(_RANGE.pack(lo, hi))
    all_codes = (
        np.concatenate([np.asarray(x, dtype=np.uint32).ravel() for x in c.codes])
        if c.codes
        else np.zeros(0, dtype=np.uint32)
    )
    parts.append(pack_codes(all_codes, c.bits))
    return b"".join(parts)


def read_quant(data: bytes) -> QuantContainer:
    """Parse container bytes; validates sizes and counts."""
    if len(data) < _HEADER.size:
        raise FormatError("container shorter than its fixed header")
    (magic, version, stage, bits, n_streams, bandwidth,
     n_frames, n_columns, n_windows, t0, w2) = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad container magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if stage not in STREAMS_PER_STAGE:
        raise FormatError(f"bad stage {stage}")
    _check_bits(bits)
    if n_streams != STREAMS_PER_STAGE[stage]:
        raise FormatError(
            f"stage {stage} stores {STREAMS_PER_STAGE[stage]} streams, "
            f"container declares {n_streams}"
        )
    offset = _HEADER.size
    if len(data) < offset + n_streams * _RANGE.size:
        raise FormatError("container truncated in the range table")
    ranges = []
    for _ in range(n_streams):
        lo, hi = _RANGE.unpack_from(data, offset)
        offset += _RANGE.size
        if hi < lo:
            raise FormatError(f"bad stream range [{lo}, {hi}]")
        ranges.append((lo, hi))
    per_stream = n_windows if stage == 4 else n_frames * n_columns
    total = per_stream * n_streams
    payload = data[offset:]
    if len(payload) != (total * bits + 7) // 8:
        raise FormatError(
            f"payload is {len(payload)} bytes, expected {(total * bits + 7) // 8}"
        )
    flat = unpack_codes(payload, total, bits)
    levels = (1 << bits) - 1
    if flat.size and int(flat.max()) > levels:
        raise FormatError(f"code exceeds {bits}-bit range")
    codes = tuple(
        flat[i * per_stream:(i + 1) * per_stream] for i in range(n_streams)
    )
    return QuantContainer(
        stage, bits, bandwidth, n_frames, n_columns, n_windows, t0, w2,
        tuple(ranges), codes,
    )


def header_size(stage: int) -> int:
    """Fixed byte cost of a container before its payload."""
    if stage not in STREAMS_PER_STAGE:
        raise FormatError(f"stage must be 1..4, got {stage}")
    return _HEADER.size + STREAMS_PER_STAGE[stage] * _RANGE.size
