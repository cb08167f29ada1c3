"""Command line surface: exit codes, outputs on disk, determinism.

All tests call ``main(argv)`` in-process and assert on files and stdout,
which is exactly what a shell user sees.
"""
import json
import socket

import numpy as np
import pytest

from conftest import MACS
from csisuite.capture_io import parse_capture_csv
from csisuite.cli import main
from csisuite.detector import read_truth_csv
from csisuite.pipeline import run_pipeline
from csisuite.core import PipelineParams


SCENARIO = {
    "seed": 31415, "duration": 30.0, "rate": 10.0, "device": MACS[0],
    "bandwidth": 20, "activity_intervals": [[8.0, 16.0], [22.0, 28.0]],
    "idle_noise": 0.03, "active_noise": 0.08, "name": "clismoke",
}


def dead_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Scenario file plus one synth run shared by the analysis tests."""
    root = tmp_path_factory.mktemp("cli")
    scenario = root / "scenario.json"
    scenario.write_text(json.dumps(SCENARIO), encoding="utf-8")
    assert main(["synth", "--scenario", str(scenario),
                 "--out", str(root / "data")]) == 0
    return root


def capture_args(workdir):
    return ["--capture", str(workdir / "data" / "capture.csv"),
            "--truth", str(workdir / "data" / "truth.csv")]


def data_lines(path):
    return [l for l in path.read_text(encoding="utf-8").splitlines()
            if l.strip() and not l.startswith("#")]


def metrics_dict(out):
    """Parse aligned ``name  value`` report lines."""
    pairs = (line.split(None, 1) for line in out.splitlines() if line.strip())
    return {key: value for key, value in pairs}


class TestExitCodes:
    def test_no_arguments_is_usage_error(self, capsys):
        assert main([]) == 1
        capsys.readouterr()

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1
        capsys.readouterr()

    def test_missing_capture_file_is_usage_error(self, tmp_path, capsys):
        truth = tmp_path / "truth.csv"
        truth.write_text("start,end\n", encoding="utf-8")
        code = main(["analyze", "--capture", str(tmp_path / "nope.csv"),
                     "--truth", str(truth)])
        assert code == 1
        capsys.readouterr()

    def test_unknown_packaged_scenario_is_input_error(self, tmp_path, capsys):
        code = main(["synth", "--scenario", "no-such-scenario",
                     "--out", str(tmp_path)])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_malformed_capture_is_input_error(self, workdir, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,capture\n1,2,3\n", encoding="utf-8")
        code = main(["analyze", "--capture", str(bad),
                     "--truth", str(workdir / "data" / "truth.csv")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_malformed_truth_is_input_error(self, workdir, tmp_path, capsys):
        bad = tmp_path / "truth.csv"
        bad.write_text("start,end\n5.0,1.0\n", encoding="utf-8")
        code = main(["analyze", "--capture",
                     str(workdir / "data" / "capture.csv"),
                     "--truth", str(bad)])
        assert code == 1
        capsys.readouterr()

    def test_bad_device_mac_is_input_error(self, workdir, capsys):
        code = main(["analyze", *capture_args(workdir),
                     "--device", "02-00-00-AA-BB-01"])
        assert code == 1
        assert "canonical MAC" in capsys.readouterr().err

    def test_unwritable_output_is_runtime_error(self, workdir, capsys):
        blocked = workdir / "data" / "capture.csv" / "sub"
        code = main(["analyze", *capture_args(workdir), "--no-figures",
                     "--out", str(blocked)])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_dead_broker_is_runtime_error(self, workdir, tmp_path, capsys):
        code = main(["collector", "--broker-port", str(dead_port()),
                     "--source", str(workdir / "scenario.json"),
                     "--capture-dir", str(tmp_path / "captures")])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestSynth:
    def test_writes_parseable_outputs(self, workdir, capsys):
        doc = parse_capture_csv(workdir / "data" / "capture.csv")
        truth = read_truth_csv(workdir / "data" / "truth.csv")
        assert doc.n_frames > 200
        assert set(doc.devices) == {MACS[0]}
        assert len(truth.intervals) == 2

    def test_reports_scenario_summary(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        scenario.write_text(json.dumps(SCENARIO), encoding="utf-8")
        assert main(["synth", "--scenario", str(scenario),
                     "--out", str(tmp_path / "out")]) == 0
        report = metrics_dict(capsys.readouterr().out)
        assert report["scenario"] == "clismoke"
        assert report["activity_intervals"] == "2"
        assert int(report["frames"]) > 200

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        scenario = tmp_path / "s.json"
        scenario.write_text(json.dumps(SCENARIO), encoding="utf-8")
        for sub in ("one", "two"):
            assert main(["synth", "--scenario", str(scenario),
                         "--out", str(tmp_path / sub)]) == 0
        capsys.readouterr()
        for name in ("capture.csv", "truth.csv"):
            first = (tmp_path / "one" / name).read_bytes()
            second = (tmp_path / "two" / name).read_bytes()
            assert first == second


class TestAnalyze:
    def test_prints_metrics(self, workdir, capsys):
        assert main(["analyze", *capture_args(workdir)]) == 0
        out = capsys.readouterr().out
        assert "auc " in out
        assert "windows " in out

    def test_out_directory_contents(self, workdir, capsys):
        out_dir = workdir / "analysis"
        assert main(["analyze", *capture_args(workdir),
                     "--out", str(out_dir)]) == 0
        stdout = capsys.readouterr().out
        assert (out_dir / "metrics.txt").read_text(encoding="utf-8") == stdout
        assert (out_dir / "features.png").exists()
        assert (out_dir / "roc.png").exists()
        series = run_pipeline(parse_capture_csv(workdir / "data" / "capture.csv"),
                              PipelineParams())
        rows = data_lines(out_dir / "features.csv")
        assert rows[0] == "window_start,value,valid"
        assert len(rows) == series.n_windows + 1

    def test_no_figures_suppresses_pngs(self, workdir, tmp_path, capsys):
        out_dir = tmp_path / "plain"
        assert main(["analyze", *capture_args(workdir), "--no-figures",
                     "--out", str(out_dir)]) == 0
        capsys.readouterr()
        assert (out_dir / "features.csv").exists()
        assert (out_dir / "metrics.txt").exists()
        assert list(out_dir.glob("*.png")) == []

    def test_exclude_invalid_never_raises_counts(self, workdir, capsys):
        assert main(["analyze", *capture_args(workdir),
                     "--exclude-invalid"]) == 0
        report = metrics_dict(capsys.readouterr().out)
        scored = int(report["positive_windows"]) + int(report["negative_windows"])
        assert scored <= int(report["windows"])
        assert scored == int(report["valid_windows"])

    def test_device_filter_accepts_present_mac(self, workdir, capsys):
        assert main(["analyze", *capture_args(workdir),
                     "--device", MACS[0]]) == 0
        capsys.readouterr()

    def test_params_override_changes_windows(self, workdir, tmp_path, capsys):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"w2": 2.0}), encoding="utf-8")
        assert main(["analyze", *capture_args(workdir)]) == 0
        default_windows = int(metrics_dict(capsys.readouterr().out)["windows"])
        assert main(["analyze", *capture_args(workdir),
                     "--params", str(params)]) == 0
        narrow_windows = int(metrics_dict(capsys.readouterr().out)["windows"])
        assert narrow_windows > default_windows

    def test_unknown_params_key_is_input_error(self, workdir, tmp_path, capsys):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"w9": 2.0}), encoding="utf-8")
        assert main(["analyze", *capture_args(workdir),
                     "--params", str(params)]) == 1
        capsys.readouterr()


class TestRocExport:
    def test_csv_layout(self, workdir, capsys):
        out = workdir / "roc" / "roc.csv"
        assert main(["roc", *capture_args(workdir), "--no-figures",
                     "--out", str(out)]) == 0
        capsys.readouterr()
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# threshold sweep")
        assert "(0,0) and (1,1)" in lines[0]
        assert lines[1].startswith("# auc ")
        area = float(lines[1].split()[2])
        assert 0.0 <= area <= 1.0
        assert lines[2] == "tau,tpr,fpr"
        rows = lines[3:]
        assert len(rows) == 1000
        tpr = np.array([float(r.split(",")[1]) for r in rows])
        fpr = np.array([float(r.split(",")[2]) for r in rows])
        assert np.all((tpr >= 0) & (tpr <= 1))
        assert np.all((fpr >= 0) & (fpr <= 1))

    def test_figure_lands_next_to_csv(self, workdir, tmp_path, capsys):
        out = tmp_path / "roc.csv"
        assert main(["roc", *capture_args(workdir), "--out", str(out)]) == 0
        capsys.readouterr()
        assert (tmp_path / "roc.png").exists()


class TestSweeps:
    def test_rate_sweep_outputs(self, workdir, capsys):
        out_dir = workdir / "rate"
        assert main(["sweep-rate", *capture_args(workdir),
                     "--out", str(out_dir)]) == 0
        table = capsys.readouterr().out
        assert "pkts/s" in table
        rows = data_lines(out_dir / "rate_sweep.csv")
        assert rows[0] == "stage,bits_or_f,auc,stored_bytes,baseline_bytes,ratio,eff_rate"
        assert len(rows) == 1 + 26
        assert (out_dir / "rate_sweep.png").exists()

    def test_quant_sweep_outputs(self, workdir, capsys):
        out_dir = workdir / "quant"
        assert main(["sweep-quant", *capture_args(workdir), "--no-figures",
                     "--out", str(out_dir)]) == 0
        table = capsys.readouterr().out
        assert "stage" in table
        rows = data_lines(out_dir / "quant_sweep.csv")
        assert rows[0] == "stage,bits_or_f,auc,stored_bytes,baseline_bytes,ratio"
        assert len(rows) == 1 + 60
        assert not (out_dir / "quant_sweep.png").exists()


class TestDeterminism:
    def test_figures_are_byte_identical_across_runs(self, workdir, tmp_path, capsys):
        first = tmp_path / "first"
        second = tmp_path / "second"
        for out_dir in (first, second):
            assert main(["analyze", *capture_args(workdir),
                         "--out", str(out_dir)]) == 0
        capsys.readouterr()
        for name in ("features.png", "roc.png", "features.csv", "metrics.txt"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
