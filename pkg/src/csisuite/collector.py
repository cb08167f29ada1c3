"""Simulated CSI collector driven over MQTT.

The collector subscribes to the ``start``, ``stop`` and ``download``
control topics, streams frames from a replay file or a synthetic
scenario into one capture CSV per configuration name, and returns
capture files on the ``output`` topic wrapped in a JSON envelope
``{name, correlation_id, row_count, payload}`` with the file bytes
base64-encoded.  Errors and lifecycle transitions are reported on the
``status`` topic as ``{event, name, ...}`` objects.

Control handling is serialized on a single dispatcher thread; each
capturing configuration owns one writer thread, so distinct
configurations capture concurrently while a given file only ever has
one writer.
"""
from __future__ import annotations

import base64
import json
import os
import queue
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .capture_io import CONFIG_COMMENT, CaptureDocument, capture_header, format_frame_row, parse_capture_csv
from .core import is_canonical_mac
from .errors import ConfigError
from .mqttlite import MqttClient
from .synth import generate, load_scenario

TOPIC_START = "start"
TOPIC_STOP = "stop"
TOPIC_DOWNLOAD = "download"
TOPIC_OUTPUT = "output"
TOPIC_STATUS = "status"

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")


def valid_config_name(name) -> bool:
    """True for non-empty filesystem-safe configuration names."""
    return isinstance(name, str) and _NAME_RE.match(name) is not None


class ReplaySource:
    """Frames replayed from an existing capture CSV."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._doc: CaptureDocument | None = None
        self._lock = threading.Lock()

    def document(self) -> CaptureDocument:
        with self._lock:
            if self._doc is None:
                self._doc = parse_capture_csv(self.path)
            return self._doc

    def describe(self) -> str:
        return f"replay:{self.path.name}"


class ScenarioSource:
    """Frames generated once from a synthetic scenario description."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._doc: CaptureDocument | None = None
        self._lock = threading.Lock()

    def document(self) -> CaptureDocument:
        with self._lock:
            if self._doc is None:
                self._doc, _ = generate(load_scenario(self.path))
            return self._doc

    def describe(self) -> str:
        return f"scenario:{self.path.name}"


@dataclass
class CaptureSession:
    name: str
    path: Path
    state: str = "idle"  # idle -> capturing -> stopped -> capturing ...
    frames: int = 0
    segments: int = 0
    last_ts: float | None = None
    thread: threading.Thread | None = None
    stop_event: threading.Event = field(default_factory=threading.Event)


def _last_timestamp(path: Path) -> float | None:
    """Timestamp of the last data row, scanning only the file tail."""
    with open(path, "rb") as fh:
        fh.seek(0, os.SEEK_END)
        size = fh.tell()
        fh.seek(max(size - 65536, 0))
        tail = fh.read().splitlines()
    for line in reversed(tail):
        if not line or line.startswith(b"#") or line.startswith(b"ts,"):
            continue
        try:
            return float(line.split(b",", 1)[0])
        except ValueError:
            continue
    return None


class CollectorService:
    """One MQTT client plus the capture state machine.

    ``accel`` scales replay pacing: with ``accel=60`` one minute of
    source timestamps streams in one second of wall time.  Timestamps
    written to the capture file are the source timestamps, untouched.
    """

    def __init__(self, broker_host: str, broker_port: int, source,
                 capture_dir: str | Path, accel: float = 1.0,
                 client_id: str = "collector"):
        if accel <= 0:
            raise ConfigError("accel must be positive")
        self.source = source
        self.capture_dir = Path(capture_dir)
        self.capture_dir.mkdir(parents=True, exist_ok=True)
        self.accel = float(accel)
        self._sessions: dict[str, CaptureSession] = {}
        self._lock = threading.Lock()
        self._commands: queue.Queue = queue.Queue()
        self._closed = False
        self._client = MqttClient(on_message=self._enqueue)
        self._client.connect(broker_host, broker_port, client_id)
        self._dispatcher = threading.Thread(
            target=self._dispatch_loop, name="collector-dispatch", daemon=True
        )
        self._dispatcher.start()
        for topic in (TOPIC_START, TOPIC_STOP, TOPIC_DOWNLOAD):
            self._client.subscribe(topic, qos=1)

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            sessions = list(self._sessions.values())
        for session in sessions:
            session.stop_event.set()
        for session in sessions:
            if session.thread is not None:
                session.thread.join(timeout=5)
        self._commands.put(None)
        self._dispatcher.join(timeout=5)
        self._client.close()

    def __enter__(self) -> "CollectorService":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def session_state(self, name: str) -> str:
        with self._lock:
            session = self._sessions.get(name)
            return session.state if session else "idle"

    # -- MQTT plumbing --------------------------------------------------

    def _enqueue(self, topic: str, payload: bytes) -> None:
        # runs on the MQTT reader thread; QoS 1 publishes would deadlock
        # here, so commands are handed to the dispatcher thread instead
        self._commands.put((topic, payload))

    def _dispatch_loop(self) -> None:
        while True:
            item = self._commands.get()
            if item is None:
                return
            topic, payload = item
            try:
                body = json.loads(payload.decode("utf-8"))
                if not isinstance(body, dict):
                    raise ValueError("payload must be a JSON object")
            except (ValueError, UnicodeDecodeError) as exc:
                self._status("error", body=None, reason=f"bad payload: {exc}")
                continue
            try:
                if topic == TOPIC_START:
                    self._on_start(body)
                elif topic == TOPIC_STOP:
                    self._on_stop(body)
                elif topic == TOPIC_DOWNLOAD:
                    self._on_download(body)
            except Exception as exc:  # keep the dispatcher alive
                self._status("error", body, reason=str(exc))

    def _status(self, event: str, body: dict | None, **extra) -> None:
        msg: dict = {"event": event}
        if body is not None and isinstance(body.get("name"), str):
            msg["name"] = body["name"]
        if body is not None and "correlation_id" in body:
            msg["correlation_id"] = body["correlation_id"]
        msg.update(extra)
        self._client.publish(TOPIC_STATUS, json.dumps(msg).encode("utf-8"), qos=1)

    # -- command handlers ------------------------------------------------

    def _on_start(self, body: dict) -> None:
        name = body.get("name")
        if not valid_config_name(name):
            self._status("error", body, reason="invalid configuration name")
            return
        device_filter = body.get("device_filter", [])
        if not isinstance(device_filter, list) or \
                not all(isinstance(m, str) and is_canonical_mac(m) for m in device_filter):
            self._status("error", body, reason="device_filter must be canonical MAC addresses")
            return
        with self._lock:
            if self._closed:
                return
            session = self._sessions.get(name)
            if session is not None and session.state == "capturing":
                self._status("error", body, reason=f"configuration {name!r} is already capturing")
                return
            if session is None:
                session = CaptureSession(name=name, path=self.capture_dir / f"{name}.csv")
                self._sessions[name] = session
            session.state = "capturing"
            session.segments += 1
            session.stop_event = threading.Event()
            session.thread = threading.Thread(
                target=self._stream, args=(session, body, device_filter),
                name=f"collector-{name}", daemon=True,
            )
            session.thread.start()
        self._status("started", body, frames=session.frames)

    def _on_stop(self, body: dict) -> None:
        name = body.get("name")
        with self._lock:
            session = self._sessions.get(name) if isinstance(name, str) else None
        if session is None or session.state != "capturing":
            self._status("error", body, reason=f"no capture running for {name!r}")
            return
        session.stop_event.set()
        if session.thread is not None:
            session.thread.join(timeout=10)
        self._status("stopped", body, frames=session.frames)

    def _on_download(self, body: dict) -> None:
        name = body.get("name")
        path = self.capture_dir / f"{name}.csv" if valid_config_name(name) else None
        if path is None or not path.exists():
            self._status("error", body, reason=f"no capture file for {name!r}")
            return
        data = path.read_bytes()
        rows = sum(1 for line in data.splitlines()
                   if line and not line.startswith(b"#"))
        rows = max(rows - 1, 0)  # header line
        envelope = {
            "name": name,
            "correlation_id": body.get("correlation_id"),
            "row_count": rows,
            "payload": base64.b64encode(data).decode("ascii"),
        }
        self._client.publish(TOPIC_OUTPUT, json.dumps(envelope).encode("utf-8"), qos=1)

    # -- capture writer ----------------------------------------------------

    def _stream(self, session: CaptureSession, config: dict,
                device_filter: list[str]) -> None:
        try:
            doc = self.source.document()
        except Exception as exc:
            with self._lock:
                session.state = "stopped"
            self._status("error", config, reason=f"source failed: {exc}")
            return
        if device_filter:
            keep = np.isin(doc.devices, np.array(device_filter))
            doc = doc.take(np.flatnonzero(keep))
        fresh = not session.path.exists() or session.path.stat().st_size == 0
        flat = doc.csi.reshape(doc.n_frames, -1)
        t0 = doc.timestamps[0] if doc.n_frames else 0.0
        # appended segments continue after the previous one: a collector
        # stamps frames at capture time, so file timestamps stay ordered
        offset = 0.0
        if not fresh:
            if session.last_ts is None:
                session.last_ts = _last_timestamp(session.path)
            if session.last_ts is not None and doc.n_frames:
                span = doc.timestamps[-1] - t0
                gap = span / (doc.n_frames - 1) if doc.n_frames > 1 else 1.0
                offset = session.last_ts + max(gap, 1e-6) - t0
        with open(session.path, "a", encoding="utf-8") as fh:
            if fresh:
                public = {k: config[k] for k in
                          ("name", "description", "band", "bandwidth",
                           "channel", "device_filter") if k in config}
                fh.write(CONFIG_COMMENT + json.dumps(public) + "\n")
                fh.write(capture_header(doc.fft_size) + "\n")
            else:
                fh.write(f"# session {session.segments}\n")
            fh.flush()
            wall0 = time.monotonic()
            natural_end = True
            for i in range(doc.n_frames):
                due = (doc.timestamps[i] - t0) / self.accel
                delay = due - (time.monotonic() - wall0)
                if delay > 0 and session.stop_event.wait(delay):
                    natural_end = False
                    break
                if session.stop_event.is_set():
                    natural_end = False
                    break
                ts = doc.timestamps[i] + offset
                fh.write(format_frame_row(ts, doc.devices[i], flat[i]) + "\n")
                fh.flush()
                session.frames += 1
                session.last_ts = ts
            fh.flush()
            os.fsync(fh.fileno())
        with self._lock:
            session.state = "stopped"
        if natural_end:
            self._status("stopped", config, frames=session.frames, reason="end of source")
