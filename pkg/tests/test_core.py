import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csisuite.core import (
    INT16_MAX,
    INT16_MIN,
    ComplexSample,
    CsiFrame,
    DeviceId,
    PipelineParams,
    SubcarrierSet,
    amplitude,
    default_subcarrier_set,
    fft_size_for,
    frame_amplitudes,
    is_canonical_mac,
    load_params,
)
from csisuite.errors import ConfigError, FormatError

int16s = st.integers(INT16_MIN, INT16_MAX)


class TestDeviceId:
    def test_canonical_form_accepted(self):
        dev = DeviceId("aa:bb:cc:00:11:22")
        assert str(dev) == "aa:bb:cc:00:11:22"

    @pytest.mark.parametrize("text", [
        "AA:bb:cc:00:11:22",     # uppercase octet
        "aa-bb-cc-00-11-22",     # wrong separator
        "aa:bb:cc:00:11",        # five octets
        "aa:bb:cc:00:11:22:33",  # seven octets
        "aa:bb:cc:00:11:2",      # short octet
        "aabbcc001122",          # no separators
        "",
    ])
    def test_non_canonical_rejected(self, text):
        assert not is_canonical_mac(text)
        with pytest.raises(FormatError):
            DeviceId(text)


class TestComplexSample:
    def test_pythagorean_triple(self):
        assert amplitude(ComplexSample(3, 4)) == 5.0

    def test_zero(self):
        assert amplitude(ComplexSample(0, 0)) == 0.0

    def test_negative_component(self):
        assert amplitude(ComplexSample(-5, 12)) == 13.0

    @pytest.mark.parametrize("re,im", [(INT16_MAX + 1, 0), (0, INT16_MIN - 1)])
    def test_out_of_range_component_rejected(self, re, im):
        with pytest.raises(FormatError):
            ComplexSample(re, im)

    @given(int16s, int16s)
    def test_amplitude_nonnegative_and_zero_only_at_origin(self, re, im):
        a = amplitude(ComplexSample(re, im))
        assert a >= 0.0
        assert (a == 0.0) == (re == 0 and im == 0)

    @given(int16s, int16s)
    def test_amplitude_symmetries(self, re, im):
        a = amplitude(ComplexSample(re, im))
        if -re <= INT16_MAX:
            assert amplitude(ComplexSample(-re, im)) == a
        assert amplitude(ComplexSample(im, re)) == a

    @given(int16s, int16s)
    def test_amplitude_matches_direct_formula(self, re, im):
        assert amplitude(ComplexSample(re, im)) == math.sqrt(re * re + im * im)


class TestSubcarrierSet:
    def test_default_20mhz_is_the_56_index_set(self):
        s = default_subcarrier_set(20)
        indices = tuple(s)
        assert len(indices) == 56
        assert indices == tuple(range(-28, 0)) + tuple(range(1, 29))
        assert 0 not in indices
        assert all(i not in indices for i in (-32, -31, -30, -29, 29, 30, 31, 32))

    def test_indices_strictly_ascending(self):
        for bw in (20, 40, 80):
            indices = tuple(default_subcarrier_set(bw))
            assert list(indices) == sorted(set(indices))

    def test_zero_index_rejected(self):
        with pytest.raises(ConfigError):
            SubcarrierSet((-1, 0, 1))

    def test_construction_sorts_and_deduplicates(self):
        assert tuple(SubcarrierSet((2, 1, 1, -3))) == (-3, 1, 2)

    def test_empty_set_representable(self):
        assert len(SubcarrierSet(())) == 0

    def test_unsupported_bandwidth(self):
        with pytest.raises(ConfigError):
            default_subcarrier_set(160)

    def test_columns_maps_index_to_fft_position(self):
        s = SubcarrierSet((-32, -1, 1, 31))
        assert s.columns(64).tolist() == [0, 31, 33, 63]

    def test_out_of_range_for_fft(self):
        with pytest.raises(ConfigError):
            SubcarrierSet((40,)).validate_for(64)


class TestCsiFrame:
    def test_empty_csi_rejected(self):
        with pytest.raises(FormatError):
            CsiFrame(0.0, DeviceId("aa:bb:cc:00:11:22"), ())

    def test_negative_timestamp_rejected(self):
        samples = tuple(ComplexSample(1, 0) for _ in range(64))
        with pytest.raises(FormatError):
            CsiFrame(-1.0, DeviceId("aa:bb:cc:00:11:22"), samples)

    def test_frame_amplitudes_over_unit_samples(self):
        samples = tuple(ComplexSample(1, 0) for _ in range(64))
        frame = CsiFrame(0.0, DeviceId("aa:bb:cc:00:11:22"), samples)
        out = frame_amplitudes(frame, default_subcarrier_set(20))
        assert out.shape == (56,)
        assert np.all(out == 1.0)

    def test_frame_amplitudes_empty_set(self):
        samples = tuple(ComplexSample(1, 0) for _ in range(64))
        frame = CsiFrame(0.0, DeviceId("aa:bb:cc:00:11:22"), samples)
        assert frame_amplitudes(frame, SubcarrierSet(())).shape == (0,)

    def test_frame_amplitudes_index_out_of_range(self):
        samples = tuple(ComplexSample(1, 0) for _ in range(64))
        frame = CsiFrame(0.0, DeviceId("aa:bb:cc:00:11:22"), samples)
        with pytest.raises(ConfigError):
            frame_amplitudes(frame, SubcarrierSet((40,)))

    def test_frame_amplitudes_follow_set_order(self):
        rng = np.random.default_rng(5)
        comps = rng.integers(-100, 101, size=(64, 2))
        samples = tuple(ComplexSample(int(r), int(i)) for r, i in comps)
        frame = CsiFrame(0.0, DeviceId("aa:bb:cc:00:11:22"), samples)
        subset = SubcarrierSet((-28, -3, 7, 28))
        out = frame_amplitudes(frame, subset)
        for j, idx in enumerate(subset):
            col = idx + 32
            assert out[j] == math.sqrt(comps[col, 0] ** 2 + comps[col, 1] ** 2)


class TestPipelineParams:
    def test_defaults(self):
        p = PipelineParams()
        assert (p.lam, p.w1, p.w2) == (3.0, 5.0, 3.0)
        assert p.overlap_frac == 0.5
        assert p.filter_history == "filtered"

    @pytest.mark.parametrize("kw", [
        {"lam": 0.0}, {"lam": -1.0}, {"w1": 0.0}, {"w2": -2.0},
        {"overlap_frac": 1.5}, {"filter_history": "both"},
    ])
    def test_invalid_values_rejected(self, kw):
        with pytest.raises(ConfigError):
            PipelineParams(**kw)

    def test_load_params_roundtrip(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{"lambda": 2.5, "w1": 4.0, "w2": 2.0, '
                        '"filter_history": "raw"}')
        p = load_params(path)
        assert (p.lam, p.w1, p.w2, p.filter_history) == (2.5, 4.0, 2.0, "raw")

    def test_load_params_unknown_key(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{"lambda": 2.5, "w3": 1}')
        with pytest.raises(ConfigError):
            load_params(path)


class TestRegistry:
    def test_fft_sizes(self):
        assert fft_size_for(20) == 64
        assert fft_size_for(40) == 128
        assert fft_size_for(80) == 256
