"""Command line entry point.

Every analysis subcommand is a thin composition of library calls:
parse inputs, run the pipeline, write the delimited outputs, and render
the matching figures next to them (disable with ``--no-figures``).
Exit codes: 0 success, 1 invalid input or configuration, 2 runtime
failure (I/O, broker, service).
"""
from __future__ import annotations

import sys
import threading
from pathlib import Path

import click

from . import report
from .capture_io import parse_capture_csv, write_capture_csv
from .collector import CollectorService, ReplaySource, ScenarioSource
from .core import PipelineParams, is_canonical_mac, load_params
from .detector import (
    auc,
    format_metrics,
    label_windows,
    read_truth_csv,
    roc,
    write_truth_csv,
)
from .errors import ConfigError, CsiSuiteError
from .pipeline import FeatureSeries, run_pipeline, write_features_csv
from .storage import format_sweep_table, run_quant_sweep, run_rate_sweep, write_sweep_csv
from .synth import generate, load_scenario, packaged_scenario

_DEFAULTS = PipelineParams()

_PARAMS_HELP = (
    "JSON file overriding pipeline parameters; defaults: "
    f"lambda={_DEFAULTS.lam:g}, w1={_DEFAULTS.w1:g} s, w2={_DEFAULTS.w2:g} s, "
    f"overlap_frac={_DEFAULTS.overlap_frac:g}, "
    f"filter_history={_DEFAULTS.filter_history}, subcarriers=standard 20 MHz set"
)


@click.group(name="csisuite")
def cli() -> None:
    """Wi-Fi CSI capture control plane and amplitude analysis tools.

    Analysis commands share one parameter set (see --params on each):
    outlier filter lambda=3, trailing window w1=5 s, aggregation window
    w2=3 s, label overlap 0.5, filter history "filtered".
    """


def _load_params(path: str | None) -> PipelineParams:
    return load_params(path) if path else PipelineParams()


def _scenario_path(ref: str) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    return packaged_scenario(ref)


def _device_option(fn):
    return click.option(
        "--device", default=None, metavar="MAC",
        help="Only analyze frames from this transmitter (canonical MAC).",
    )(fn)


def _check_device(device: str | None) -> tuple[str, ...] | None:
    """Validated --device value as the device_filter collection."""
    if device is None:
        return None
    if not is_canonical_mac(device):
        raise ConfigError(f"not a canonical MAC address: {device!r}")
    return (device,)


def _figures_option(fn):
    return click.option(
        "--figures/--no-figures", default=True, show_default=True,
        help="Render PNG figures next to the delimited outputs.",
    )(fn)


@cli.command()
@click.option("--scenario", required=True, metavar="FILE|NAME",
              help="Scenario JSON path, or a packaged scenario name "
                   "(uc1-room, uc2-door).")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output directory for capture.csv and truth.csv.")
def synth(scenario: str, out: str) -> None:
    """Generate a seeded capture and its ground truth."""
    spec = load_scenario(_scenario_path(scenario))
    doc, truth = generate(spec)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_capture_csv(doc, out_dir / "capture.csv")
    write_truth_csv(truth, out_dir / "truth.csv")
    click.echo(format_metrics({
        "scenario": spec.name,
        "frames": doc.n_frames,
        "duration_s": float(doc.timestamps[-1] - doc.timestamps[0]) if doc.n_frames else 0.0,
        "activity_intervals": len(truth.intervals),
        "capture": str(out_dir / "capture.csv"),
        "truth": str(out_dir / "truth.csv"),
    }), nl=False)


def _analysis_inputs(capture: str, truth: str, params: str | None,
                     device: str | None):
    p = _load_params(params)
    doc = parse_capture_csv(capture)
    gt = read_truth_csv(truth)
    series = run_pipeline(doc, p, device_filter=_check_device(device))
    return doc, gt, p, series


def _valid_subset(series: FeatureSeries, labels):
    keep = series.valid.astype(bool)
    sub = FeatureSeries(series.window_starts[keep], series.window_length,
                        series.values[keep], series.valid[keep])
    return sub, labels[keep]


@cli.command()
@click.option("--capture", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--params", default=None, type=click.Path(exists=True, dir_okay=False),
              help=_PARAMS_HELP)
@_device_option
@click.option("--exclude-invalid", is_flag=True,
              help="Drop windows with fewer than two frames from the ROC.")
@click.option("--out", default=None, type=click.Path(file_okay=False),
              help="Also write features.csv, metrics.txt and figures here.")
@_figures_option
def analyze(capture, truth, params, device, exclude_invalid, out, figures) -> None:
    """Run the amplitude pipeline and report detection metrics."""
    doc, gt, p, series = _analysis_inputs(capture, truth, params, device)
    labels = label_windows(gt, series, p.overlap_frac)
    scored, scored_labels = (series, labels)
    if exclude_invalid:
        scored, scored_labels = _valid_subset(series, labels)
    curve = roc(scored, scored_labels)
    area = auc(curve)
    metrics = {
        "frames": doc.n_frames,
        "windows": series.n_windows,
        "valid_windows": int(series.valid.sum()),
        "positive_windows": int(scored_labels.sum()),
        "negative_windows": int(scored_labels.size - scored_labels.sum()),
        "auc": area,
    }
    click.echo(format_metrics(metrics), nl=False)
    if out is None:
        return
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_features_csv(series, out_dir / "features.csv")
    (out_dir / "metrics.txt").write_text(format_metrics(metrics), encoding="utf-8")
    if figures:
        report.save_feature_figure(series, gt, out_dir / "features.png")
        report.save_roc_figure(curve, out_dir / "roc.png", auc_value=area)


@cli.command(name="roc")
@click.option("--capture", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--params", default=None, type=click.Path(exists=True, dir_okay=False),
              help=_PARAMS_HELP)
@_device_option
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Destination CSV; the figure lands next to it as .png.")
@_figures_option
def roc_cmd(capture, truth, params, device, out, figures) -> None:
    """Export the 1000-threshold sweep as tau,tpr,fpr rows."""
    _, gt, p, series = _analysis_inputs(capture, truth, params, device)
    labels = label_windows(gt, series, p.overlap_frac)
    curve = roc(series, labels)
    area = auc(curve)
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# threshold sweep over the feature range; the anchor "
                 "points (0,0) and (1,1) are implied, not listed\n")
        fh.write(f"# auc {area:.6f}\n")
        fh.write("tau,tpr,fpr\n")
        for tau, tpr, fpr in zip(curve.taus, curve.tpr, curve.fpr):
            fh.write(f"{tau:.9g},{tpr:.9g},{fpr:.9g}\n")
    click.echo(format_metrics({"thresholds": curve.taus.size, "auc": area,
                               "out": str(out_path)}), nl=False)
    if figures:
        report.save_roc_figure(curve, out_path.with_suffix(".png"), auc_value=area)


@cli.command(name="sweep-rate")
@click.option("--capture", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--params", default=None, type=click.Path(exists=True, dir_okay=False),
              help=_PARAMS_HELP)
@_device_option
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output directory for rate_sweep.csv and its figure.")
@_figures_option
def sweep_rate(capture, truth, params, device, out, figures) -> None:
    """Decimation study: AUC and storage for every rate grid point."""
    doc, gt, p, _ = _analysis_inputs(capture, truth, params, device)
    result = run_rate_sweep(doc, gt, p, device_filter=_check_device(device))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result, out_dir / "rate_sweep.csv")
    click.echo(format_sweep_table(result))
    if figures:
        report.save_rate_figure(result, out_dir / "rate_sweep.png")


@cli.command(name="sweep-quant")
@click.option("--capture", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--params", default=None, type=click.Path(exists=True, dir_okay=False),
              help=_PARAMS_HELP)
@_device_option
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output directory for quant_sweep.csv and its figure.")
@_figures_option
def sweep_quant(capture, truth, params, device, out, figures) -> None:
    """Quantization study: AUC and storage for all stages and widths."""
    doc, gt, p, _ = _analysis_inputs(capture, truth, params, device)
    result = run_quant_sweep(doc, gt, p, device_filter=_check_device(device))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result, out_dir / "quant_sweep.csv")
    click.echo(format_sweep_table(result))
    if figures:
        report.save_quant_figure(result, out_dir / "quant_sweep.png")


@cli.command()
@click.option("--store", required=True, type=click.Path(dir_okay=False),
              help="Configuration store JSON file (created when missing).")
@click.option("--broker-host", default="127.0.0.1", show_default=True)
@click.option("--broker-port", default=1883, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True,
              help="HTTP listen address.")
@click.option("--port", default=8000, show_default=True, type=int,
              help="HTTP listen port.")
@click.option("--download-timeout", default=30.0, show_default=True, type=float,
              help="Seconds to wait for the collector's output envelope.")
@click.option("--ui-dir", default=None, type=click.Path(file_okay=False, exists=True),
              help="Static web UI assets to serve under /ui.")
def serve(store, broker_host, broker_port, host, port, download_timeout, ui_dir) -> None:
    """Run the HTTP control service."""
    import uvicorn

    from .control import create_app

    app = create_app(store, broker_host, broker_port,
                     download_timeout=download_timeout, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


@cli.command()
@click.option("--broker-host", default="127.0.0.1", show_default=True)
@click.option("--broker-port", default=1883, show_default=True, type=int)
@click.option("--source", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Scenario JSON (.json) or capture CSV to replay.")
@click.option("--capture-dir", required=True, type=click.Path(file_okay=False),
              help="Directory receiving one capture CSV per configuration.")
@click.option("--accel", default=1.0, show_default=True, type=float,
              help="Replay speed multiplier (source seconds per wall second).")
@click.option("--client-id", default="collector", show_default=True)
def collector(broker_host, broker_port, source, capture_dir, accel, client_id) -> None:
    """Run the simulated CSI collector against an MQTT broker."""
    source_path = Path(source)
    if source_path.suffix.lower() == ".json":
        frame_source = ScenarioSource(source_path)
    else:
        frame_source = ReplaySource(source_path)
    service = CollectorService(broker_host, broker_port, frame_source,
                               capture_dir, accel=accel, client_id=client_id)
    click.echo(f"collector connected to {broker_host}:{broker_port}, "
               f"captures in {capture_dir}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        service.close()


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping error classes onto exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ValueError as exc:
        # FormatError, ConfigError, NoFramesError subclass ValueError
        click.echo(f"error: {exc}", err=True)
        return 1
    except (RuntimeError, OSError, CsiSuiteError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
