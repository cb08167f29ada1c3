"""Wi-Fi CSI capture tooling: control plane, amplitude pipeline, studies.

The package splits into a capture side (``mqttlite``, ``collector``,
``control``) and an analysis side (``capture_io``, ``pipeline``,
``detector``, ``storage``, ``quantfile``, ``synth``), tied together by
the ``csisuite`` command line tool.
"""
from .capture_io import CaptureDocument, parse_capture_csv, write_capture_csv
from .core import (
    ComplexSample,
    CsiFrame,
    DeviceId,
    PipelineParams,
    SubcarrierSet,
    amplitude,
    default_subcarrier_set,
    load_params,
)
from .detector import GroundTruth, RocCurve, auc, classify, label_windows, roc
from .errors import (
    ConfigError,
    CsiSuiteError,
    FormatError,
    NoFramesError,
    StateError,
    TransportError,
)
from .pipeline import (
    AmplitudeMatrix,
    FeatureSeries,
    aggregate,
    extract_amplitudes,
    filter_outliers,
    run_pipeline,
)
from .storage import SweepReport, SweepRow, decimate, run_quant_sweep, run_rate_sweep
from .synth import Scenario, generate, load_scenario, packaged_scenario

__version__ = "0.1.0"

__all__ = [
    "AmplitudeMatrix",
    "CaptureDocument",
    "ComplexSample",
    "ConfigError",
    "CsiFrame",
    "CsiSuiteError",
    "DeviceId",
    "FeatureSeries",
    "FormatError",
    "GroundTruth",
    "NoFramesError",
    "PipelineParams",
    "RocCurve",
    "Scenario",
    "StateError",
    "SubcarrierSet",
    "SweepReport",
    "SweepRow",
    "TransportError",
    "aggregate",
    "amplitude",
    "auc",
    "classify",
    "decimate",
    "default_subcarrier_set",
    "extract_amplitudes",
    "filter_outliers",
    "generate",
    "label_windows",
    "load_params",
    "load_scenario",
    "packaged_scenario",
    "parse_capture_csv",
    "roc",
    "run_pipeline",
    "run_quant_sweep",
    "run_rate_sweep",
    "write_capture_csv",
]
