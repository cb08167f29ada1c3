"""Shared builders and session-wide fixtures."""
from __future__ import annotations

import numpy as np
import pytest

from csisuite.capture_io import CaptureDocument
from csisuite.core import PipelineParams, SubcarrierSet
from csisuite.synth import generate, load_scenario, packaged_scenario

MACS = ("02:00:00:aa:bb:01", "02:00:00:aa:bb:02", "02:00:00:aa:bb:03")


def make_document(rng: np.random.Generator, n_frames: int, *,
                  span: float = 30.0, n_devices: int = 1,
                  tie_frac: float = 0.0, amp: int = 600) -> CaptureDocument:
    """Random well-formed 20 MHz document for property tests.

    ``tie_frac`` duplicates that fraction of timestamps so the half-open
    statistics window [t - w1, t) gets exercised on equal arrival times.
    """
    ts = np.sort(rng.uniform(0.0, span, n_frames))
    if tie_frac > 0.0 and n_frames > 1:
        n_ties = int(tie_frac * n_frames)
        for pos in rng.integers(1, n_frames, n_ties):
            ts[pos] = ts[pos - 1]
        ts = np.sort(ts)
    ts = np.round(ts, 6)
    devices = np.array([MACS[i % n_devices] for i in range(n_frames)], dtype="<U17")
    csi = rng.integers(-amp, amp + 1, size=(n_frames, 64, 2)).astype(np.int16)
    return CaptureDocument(ts, devices, csi, 20)


def narrow_params(n_subcarriers: int = 8, **overrides) -> PipelineParams:
    """Params with a reduced subcarrier set to keep brute-force oracles fast."""
    half = n_subcarriers // 2
    indices = tuple(range(-half, 0)) + tuple(range(1, n_subcarriers - half + 1))
    return PipelineParams(subcarriers=SubcarrierSet(indices), **overrides)


@pytest.fixture(scope="session")
def uc1_data():
    """(document, truth) for the packaged room-occupancy scenario."""
    return generate(load_scenario(packaged_scenario("uc1-room")))


@pytest.fixture(scope="session")
def uc2_data():
    """(document, truth) for the packaged door-transit scenario."""
    return generate(load_scenario(packaged_scenario("uc2-door")))


@pytest.fixture(scope="session")
def small_scenario_data():
    """A fast low-frame scenario reused by tests that only need shape."""
    from csisuite.synth import Scenario

    scenario = Scenario(
        seed=90210, duration=60.0, rate=15.0, device=MACS[0], bandwidth=20,
        activity_intervals=((12.0, 24.0), (40.0, 52.0)),
        idle_noise=0.03, active_noise=0.08, name="small",
    )
    return generate(scenario)
