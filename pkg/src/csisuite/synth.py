"""Deterministic capture synthesis for pipeline and storage studies.

A scenario describes one device transmitting at a mean packet rate while
activity happens inside the listed intervals.  Generation is fully
reproducible: every random draw comes from a counter-based Philox
generator keyed as (seed, stream), with fixed stream numbers

    0 packet arrivals, 1 sensor noise, 2 spike placement,
    3 spike gains, 4 sample phases, 5 movement fading tones

so two runs of the same scenario produce byte-identical captures.

Per usable subcarrier i the idle amplitude baseline is::

    b_i = baseline_scale * (1 + 0.3 * sin(pi * i / 29))

and each sample's amplitude is b_i * (1 + eps).  The disturbance eps has
two parts.  Sensor noise is an independent zero-mean normal draw per
sample with std idle_noise, clipped at 2.5 sigma so that a spike-free
capture passes a trailing 3-sigma outlier filter even when the trailing
std estimate runs several percent low.
Movement adds, inside each activity interval, a temporally correlated
term: per interval and subcarrier a random mixture of 8 low-frequency
tones (0.2 to 0.8 Hz, unit variance, clipped at 2.5 sigma) scaled by
sqrt(active_noise**2 - idle_noise**2) and by a raised-cosine ramp over
the first and last sixth of the interval (clamped to 0.8 to 3 s).  A
moving reflector shifts the channel smoothly, so the disturbance fades
in and drifts rather than jumping sample by sample; away from the ramps
the combined std is within one percent of active_noise.  With probability spike_prob a sample is multiplied by a
uniform gain from the spike_gain range (an impulsive interference
stand-in).  Amplitude and a uniform random phase then become integer
real/imaginary components.  Bins outside the usable set stay null, as on
real hardware.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .capture_io import CaptureDocument
from .core import default_registry, is_canonical_mac, INT16_MAX, INT16_MIN
from .detector import GroundTruth
from .errors import ConfigError

_STREAM_ARRIVALS = 0
_STREAM_NOISE = 1
_STREAM_SPIKE_MASK = 2
_STREAM_SPIKE_GAIN = 3
_STREAM_PHASE = 4
_STREAM_FADING = 5

_NOISE_CLIP = 2.5
_FADING_TONES = 8
_FADING_BAND_HZ = (0.2, 0.8)
_FADING_CLIP = 2.5
_RAMP_FRACTION = 1.0 / 6.0
_RAMP_MIN_SECONDS = 0.8
_RAMP_MAX_SECONDS = 3.0


@dataclass(frozen=True)
class Scenario:
    """A synthetic capture description; see the module docstring."""

    seed: int
    duration: float
    rate: float
    device: str
    bandwidth: int
    activity_intervals: tuple[tuple[float, float], ...]
    idle_noise: float = 0.01
    active_noise: float = 0.08
    spike_prob: float = 0.001
    spike_gain: tuple[float, float] = (3.0, 6.0)
    baseline_scale: float = 500.0
    name: str = "scenario"

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must fit 64 bits, got {self.seed}")
        if self.duration <= 0:
            raise ConfigError(f"duration must be positive, got {self.duration}")
        if self.rate <= 0:
            raise ConfigError(f"rate must be positive, got {self.rate}")
        if not is_canonical_mac(self.device):
            raise ConfigError(f"device must be a canonical MAC, got {self.device!r}")
        default_registry().get(self.bandwidth)
        intervals = tuple(
            (float(a), float(b)) for a, b in self.activity_intervals
        )
        for a, b in intervals:
            if not b > a:
                raise ConfigError(f"activity interval [{a}, {b}) is empty")
            if a < 0 or b > self.duration:
                raise ConfigError(
                    f"activity interval [{a}, {b}) outside [0, {self.duration})"
                )
        object.__setattr__(self, "activity_intervals", intervals)
        if not self.idle_noise > 0:
            raise ConfigError("idle_noise must be positive")
        if not self.active_noise > self.idle_noise:
            raise ConfigError("active_noise must exceed idle_noise")
        if not 0.0 <= self.spike_prob < 1.0:
            raise ConfigError(f"spike_prob must be in [0, 1), got {self.spike_prob}")
        lo, hi = self.spike_gain
        if not (lo > 0 and hi >= lo):
            raise ConfigError(f"bad spike_gain range {self.spike_gain}")
        object.__setattr__(self, "spike_gain", (float(lo), float(hi)))
        if self.baseline_scale <= 0:
            raise ConfigError("baseline_scale must be positive")


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario JSON file (keys match the Scenario fields)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    raw = dict(raw)
    raw.pop("comment", None)
    required = {"seed", "duration", "rate", "device", "bandwidth", "activity_intervals"}
    optional = {
        "idle_noise", "active_noise", "spike_prob", "spike_gain",
        "baseline_scale", "name",
    }
    missing = required - set(raw)
    if missing:
        raise ConfigError(f"{path}: missing scenario keys {sorted(missing)}")
    unknown = set(raw) - required - optional
    if unknown:
        raise ConfigError(f"{path}: unknown scenario keys {sorted(unknown)}")
    raw["activity_intervals"] = tuple(tuple(p) for p in raw["activity_intervals"])
    if "spike_gain" in raw:
        raw["spike_gain"] = tuple(raw["spike_gain"])
    try:
        return Scenario(**raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def packaged_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. "uc1-room")."""
    from importlib import resources

    candidate = resources.files("csisuite.data").joinpath(f"scenarios/{name}.json")
    with resources.as_file(candidate) as path:
        if not path.exists():
            raise ConfigError(f"no packaged scenario named {name!r}")
        return path


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    )


def _arrival_times(scenario: Scenario) -> np.ndarray:
    gen = _stream(scenario.seed, _STREAM_ARRIVALS)
    mean_gap = 1.0 / scenario.rate
    expected = scenario.rate * scenario.duration
    block = max(16, int(expected + 10.0 * math.sqrt(expected) + 10.0))
    times = np.cumsum(gen.exponential(mean_gap, block))
    while times.size and times[-1] < scenario.duration:
        more = np.cumsum(gen.exponential(mean_gap, block)) + times[-1]
        times = np.concatenate((times, more))
    times = times[times < scenario.duration]
    # microsecond canonical form; rounding preserves ordering
    return np.round(times, 6)


def _ramp_seconds(length: float) -> float:
    """Edge fade duration for an interval of the given length.

    A door passage disturbs the channel for most of its short duration,
    while someone settling into a room builds up over several seconds, so
    the fade spans a sixth of the interval, clamped to [0.8 s, 5 s].
    """
    return min(_RAMP_MAX_SECONDS, max(_RAMP_MIN_SECONDS, length * _RAMP_FRACTION))


def _edge_ramp(u: np.ndarray, ramp: float) -> np.ndarray:
    """Raised-cosine rise from 0 at u=0 to 1 at u >= ramp."""
    x = np.minimum(u, ramp) * (np.pi / (2.0 * ramp))
    return np.sin(x) ** 2


def _movement(scenario: Scenario, times: np.ndarray, k: int) -> np.ndarray:
    """Correlated per-subcarrier disturbance, nonzero inside the intervals.

    Each interval gets a fresh unit-variance tone mixture per subcarrier;
    the ramp keeps interval edges continuous so onsets drift instead of
    stepping.  Returned values are in relative amplitude units (as eps).
    """
    gen = _stream(scenario.seed, _STREAM_FADING)
    scale = math.sqrt(scenario.active_noise ** 2 - scenario.idle_noise ** 2)
    out = np.zeros((times.size, k))
    for a, b in scenario.activity_intervals:
        freqs = gen.uniform(*_FADING_BAND_HZ, (k, _FADING_TONES))
        phases = gen.uniform(0.0, 2.0 * np.pi, (k, _FADING_TONES))
        lo, hi = np.searchsorted(times, (a, b), side="left")
        if lo == hi:
            continue
        u = times[lo:hi] - a
        fade = _ramp_seconds(b - a)
        ramp = _edge_ramp(u, fade) * _edge_ramp((b - a) - u, fade)
        # chunked so one long interval cannot balloon the (frames, k, tones) cube
        for s in range(0, u.size, 8192):
            block = u[s:s + 8192]
            tones = np.cos(
                2.0 * np.pi * freqs[None, :, :] * block[:, None, None]
                + phases[None, :, :]
            )
            mix = tones.sum(axis=2) * math.sqrt(2.0 / _FADING_TONES)
            np.clip(mix, -_FADING_CLIP, _FADING_CLIP, out=mix)
            out[lo + s:lo + s + block.size] += (
                (scale * ramp[s:s + 8192])[:, None] * mix
            )
    return out


def generate(scenario: Scenario) -> tuple[CaptureDocument, GroundTruth]:
    """Synthesize one capture and its ground truth.

    Returns
    -------
    (CaptureDocument, GroundTruth)
        The document carries int16 components; the truth simply echoes the
        scenario's activity intervals.
    """
    fmt = default_registry().get(scenario.bandwidth)
    times = _arrival_times(scenario)
    n = times.size
    usable = np.asarray(fmt.usable.indices, dtype=np.float64)
    cols = fmt.usable.columns(fmt.fft_size)
    k = len(cols)

    baseline = scenario.baseline_scale * (1.0 + 0.3 * np.sin(np.pi * usable / 29.0))
    eps = _stream(scenario.seed, _STREAM_NOISE).standard_normal((n, k))
    np.clip(eps, -_NOISE_CLIP, _NOISE_CLIP, out=eps)
    eps *= scenario.idle_noise
    eps += _movement(scenario, times, k)
    amp = baseline[None, :] * (1.0 + eps)
    np.maximum(amp, 0.0, out=amp)

    spike_mask = (
        _stream(scenario.seed, _STREAM_SPIKE_MASK).random((n, k)) < scenario.spike_prob
    )
    gains = _stream(scenario.seed, _STREAM_SPIKE_GAIN).uniform(
        scenario.spike_gain[0], scenario.spike_gain[1], (n, k)
    )
    amp = np.where(spike_mask, amp * gains, amp)

    phase = _stream(scenario.seed, _STREAM_PHASE).uniform(0.0, 2.0 * np.pi, (n, k))
    re = np.clip(np.rint(amp * np.cos(phase)), INT16_MIN, INT16_MAX).astype(np.int16)
    im = np.clip(np.rint(amp * np.sin(phase)), INT16_MIN, INT16_MAX).astype(np.int16)

    csi = np.zeros((n, fmt.fft_size, 2), dtype=np.int16)
    csi[:, cols, 0] = re
    csi[:, cols, 1] = im
    devices = np.full(n, scenario.device, dtype="<U17")
    doc = CaptureDocument(times, devices, csi, scenario.bandwidth)
    return doc, GroundTruth(scenario.activity_intervals)
