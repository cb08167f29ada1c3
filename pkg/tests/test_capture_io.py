import io

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import MACS, make_document
from csisuite.capture_io import (
    CONFIG_COMMENT,
    CaptureDocument,
    capture_csv_text,
    capture_header,
    format_frame_row,
    parse_capture_csv,
    write_capture_csv,
)
from csisuite.core import ComplexSample, CsiFrame, DeviceId
from csisuite.errors import FormatError, NoFramesError


def make_row(ts=0.0, mac=MACS[0], fill=(1, 2), fft=64):
    return f"{ts:.6f},{mac}," + ",".join(
        f"{fill[0]},{fill[1]}" for _ in range(fft)
    )


HEADER = capture_header(64)


class TestParse:
    def test_minimal_document(self):
        doc = parse_capture_csv(io.StringIO(HEADER + "\n" + make_row() + "\n"))
        assert doc.n_frames == 1
        assert doc.fft_size == 64
        assert doc.bandwidth == 20

    def test_header_only_is_empty_document(self):
        doc = parse_capture_csv(io.StringIO(HEADER + "\n"))
        assert doc.n_frames == 0

    def test_bad_mac_names_line(self):
        text = HEADER + "\n" + make_row() + "\n" + make_row(1.0, "zz:bb:cc:00:11:22") + "\n"
        with pytest.raises(FormatError, match="line 3"):
            parse_capture_csv(io.StringIO(text))

    def test_wrong_column_count_names_line(self):
        text = HEADER + "\n" + make_row() + ",7\n"
        with pytest.raises(FormatError, match="line 2"):
            parse_capture_csv(io.StringIO(text))

    def test_non_integer_component(self):
        row = make_row().rsplit(",", 1)[0] + ",1.5"
        with pytest.raises(FormatError, match="line 2"):
            parse_capture_csv(io.StringIO(HEADER + "\n" + row + "\n"))

    def test_component_out_of_int16_range(self):
        row = make_row().rsplit(",", 1)[0] + ",40000"
        with pytest.raises(FormatError, match="line 2"):
            parse_capture_csv(io.StringIO(HEADER + "\n" + row + "\n"))

    def test_negative_timestamp_rejected(self):
        text = HEADER + "\n" + make_row(ts=-1.0) + "\n"
        with pytest.raises(FormatError, match="line 2"):
            parse_capture_csv(io.StringIO(text))

    def test_out_of_order_timestamps_rejected(self):
        text = HEADER + "\n" + make_row(2.0) + "\n" + make_row(1.0) + "\n"
        with pytest.raises(FormatError, match="out of order"):
            parse_capture_csv(io.StringIO(text))

    def test_equal_timestamps_allowed(self):
        text = HEADER + "\n" + make_row(1.0) + "\n" + make_row(1.0, fill=(3, 4)) + "\n"
        assert parse_capture_csv(io.StringIO(text)).n_frames == 2

    def test_config_comment_recovered(self):
        text = CONFIG_COMMENT + "cam1\n" + HEADER + "\n" + make_row() + "\n"
        assert parse_capture_csv(io.StringIO(text)).source_config == "cam1"

    def test_other_comments_ignored(self):
        text = "# anything\n" + HEADER + "\n# mid\n" + make_row() + "\n"
        assert parse_capture_csv(io.StringIO(text)).n_frames == 1

    def test_non_canonical_header_rejected(self):
        with pytest.raises(FormatError, match="header"):
            parse_capture_csv(io.StringIO("time,mac\n"))

    def test_path_input(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text(HEADER + "\n" + make_row() + "\n")
        assert parse_capture_csv(p).n_frames == 1


class TestWrite:
    def test_empty_document_is_header_only(self):
        doc = CaptureDocument(np.empty(0), np.empty(0, dtype="<U17"),
                              np.empty((0, 64, 2), dtype=np.int16), 20)
        assert capture_csv_text(doc) == HEADER + "\n"

    def test_two_frames_three_lines(self, tmp_path):
        rng = np.random.default_rng(0)
        doc = make_document(rng, 2)
        assert capture_csv_text(doc).count("\n") == 3

    def test_config_comment_emitted_first(self):
        doc = CaptureDocument(np.empty(0), np.empty(0, dtype="<U17"),
                              np.empty((0, 64, 2), dtype=np.int16), 20,
                              source_config="cam1")
        assert capture_csv_text(doc).startswith(CONFIG_COMMENT + "cam1\n")

    def test_float_components_refused(self):
        doc = CaptureDocument(np.array([0.0]), np.array([MACS[0]]),
                              np.full((1, 64, 2), 0.5), 20)
        with pytest.raises(FormatError):
            capture_csv_text(doc)


class TestRoundTrip:
    @settings(max_examples=25, deadline=None,
              suppress_health_check=[HealthCheck.too_slow])
    @given(st.integers(0, 2**32 - 1), st.integers(1, 40))
    def test_parse_write_identity_on_documents(self, seed, n_frames):
        rng = np.random.default_rng(seed)
        doc = make_document(rng, n_frames, n_devices=2, tie_frac=0.15)
        text = capture_csv_text(doc)
        again = parse_capture_csv(io.StringIO(text))
        assert again.equals(doc)

    def test_write_parse_identity_on_canonical_text(self):
        rng = np.random.default_rng(7)
        doc = make_document(rng, 17)
        text = capture_csv_text(doc)
        assert capture_csv_text(parse_capture_csv(io.StringIO(text))) == text

    def test_file_round_trip_bytes(self, tmp_path):
        rng = np.random.default_rng(8)
        doc = make_document(rng, 25, n_devices=3)
        path = tmp_path / "out.csv"
        write_capture_csv(doc, path)
        data = path.read_bytes()
        reparsed = parse_capture_csv(path)
        path2 = tmp_path / "again.csv"
        write_capture_csv(reparsed, path2)
        assert path2.read_bytes() == data


class TestFromFrames:
    def test_builds_document(self):
        samples = tuple(ComplexSample(3, 4) for _ in range(64))
        frames = [CsiFrame(float(i), DeviceId(MACS[0]), samples) for i in range(3)]
        doc = CaptureDocument.from_frames(frames)
        assert doc.n_frames == 3
        assert doc.bandwidth == 20

    def test_zero_frames_rejected(self):
        with pytest.raises(NoFramesError):
            CaptureDocument.from_frames([])

    def test_mismatched_length_rejected(self):
        samples64 = tuple(ComplexSample(1, 0) for _ in range(64))
        samples128 = tuple(ComplexSample(1, 0) for _ in range(128))
        frames = [CsiFrame(0.0, DeviceId(MACS[0]), samples64),
                  CsiFrame(1.0, DeviceId(MACS[0]), samples128)]
        with pytest.raises(FormatError):
            CaptureDocument.from_frames(frames)


class TestRowFormat:
    def test_header_layout(self):
        cols = HEADER.split(",")
        assert cols[:2] == ["ts", "mac"]
        assert cols[2] == "re_-32"
        assert cols[3] == "im_-32"
        assert cols[-2] == "re_31"
        assert cols[-1] == "im_31"

    def test_row_formatting(self):
        row = format_frame_row(1.5, MACS[0], [1, -2] * 64)
        assert row.startswith("1.500000," + MACS[0] + ",1,-2,")
