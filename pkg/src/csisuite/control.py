"""HTTP control service for capture configurations.

The service keeps the configuration store (one schema-versioned JSON
document, written atomically), publishes ``start``/``stop``/``download``
control messages over MQTT, and reconciles configuration status from
the collector's ``status`` events: ``started`` marks a configuration
running, ``stopped`` marks it stopped.  Collector ``error`` events
resolve pending downloads via their correlation id; they never mutate
stored status.

Endpoints return JSON (``{"detail": ...}`` for errors):

* ``GET /healthz``
* ``GET/POST /configs``
* ``GET/PUT/DELETE /configs/{name}``
* ``POST /configs/{name}/start`` and ``.../stop``
* ``GET /configs/{name}/output`` (capture CSV, via the collector)
"""
from __future__ import annotations

import base64
import json
import os
import tempfile
import threading
import uuid
from contextlib import asynccontextmanager
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.staticfiles import StaticFiles

from .collector import TOPIC_DOWNLOAD, TOPIC_OUTPUT, TOPIC_START, TOPIC_STATUS, TOPIC_STOP, valid_config_name
from .core import is_canonical_mac
from .errors import ConfigError, TransportError
from .mqttlite import MqttClient

STORE_VERSION = 1

_BANDWIDTHS = {2.4: (20, 40), 5.0: (40, 80)}


def _channels_5ghz() -> tuple[int, ...]:
    ref = resources.files("csisuite.data").joinpath("channels-5ghz.json")
    return tuple(json.loads(ref.read_text(encoding="utf-8"))["channels"])


CHANNELS_5GHZ = _channels_5ghz()


def validate_config(body: dict) -> dict:
    """Normalize a configuration document, raising ConfigError when invalid.

    Returns the canonical form: name, description, band, bandwidth,
    channel, device_filter, status (always "stopped"; lifecycle state is
    owned by the service, not the caller).
    """
    if not isinstance(body, dict):
        raise ConfigError("configuration must be a JSON object")
    allowed = {"name", "description", "band", "bandwidth", "channel",
               "device_filter", "status"}
    unknown = set(body) - allowed
    if unknown:
        raise ConfigError(f"unknown fields: {', '.join(sorted(unknown))}")
    name = body.get("name")
    if not valid_config_name(name):
        raise ConfigError("name must be a non-empty filesystem-safe string")
    description = body.get("description", "")
    if not isinstance(description, str):
        raise ConfigError("description must be a string")
    band = body.get("band")
    if isinstance(band, bool) or not isinstance(band, (int, float)):
        raise ConfigError("band must be 2.4 or 5")
    band = float(band)
    if band not in _BANDWIDTHS:
        raise ConfigError("band must be 2.4 or 5")
    bandwidth = body.get("bandwidth")
    if isinstance(bandwidth, bool) or not isinstance(bandwidth, int):
        raise ConfigError("bandwidth must be an integer (MHz)")
    if bandwidth not in _BANDWIDTHS[band]:
        choices = " or ".join(str(b) for b in _BANDWIDTHS[band])
        raise ConfigError(f"band {band:g} requires bandwidth {choices}")
    channel = body.get("channel")
    if isinstance(channel, bool) or not isinstance(channel, int):
        raise ConfigError("channel must be an integer")
    if band == 2.4:
        if not 1 <= channel <= 13:
            raise ConfigError("band 2.4 requires channel 1 to 13")
    elif channel not in CHANNELS_5GHZ:
        raise ConfigError("channel is not a valid 5 GHz channel")
    device_filter = body.get("device_filter", [])
    if not isinstance(device_filter, list) or \
            not all(isinstance(m, str) and is_canonical_mac(m) for m in device_filter):
        raise ConfigError("device_filter must be a list of canonical MAC addresses")
    return {
        "name": name,
        "description": description,
        "band": band,
        "bandwidth": bandwidth,
        "channel": channel,
        "device_filter": list(device_filter),
        "status": "stopped",
    }


class ConfigStore:
    """Configuration persistence with atomic writes.

    The whole store is one JSON document; every mutation rewrites it to
    a temporary file in the same directory and renames it into place, so
    a crash never leaves a torn store behind.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.RLock()
        if self.path.exists():
            data = json.loads(self.path.read_text(encoding="utf-8"))
            if data.get("version") != STORE_VERSION:
                raise ConfigError(f"unsupported store version {data.get('version')!r}")
            self._configs: dict[str, dict] = data["configs"]
        else:
            self._configs = {}
            self._save()

    def _save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"version": STORE_VERSION, "configs": self._configs}
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, self.path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise

    def list(self) -> list[dict]:
        with self._lock:
            return [dict(self._configs[k]) for k in sorted(self._configs)]

    def get(self, name: str) -> dict | None:
        with self._lock:
            cfg = self._configs.get(name)
            return dict(cfg) if cfg else None

    def create(self, config: dict) -> dict:
        with self._lock:
            if config["name"] in self._configs:
                raise ConfigError(f"configuration {config['name']!r} already exists")
            self._configs[config["name"]] = dict(config)
            self._save()
            return dict(config)

    def replace(self, name: str, config: dict) -> dict:
        with self._lock:
            current = self._configs[name]
            config = dict(config, status=current["status"])
            self._configs[name] = config
            self._save()
            return dict(config)

    def delete(self, name: str) -> None:
        with self._lock:
            del self._configs[name]
            self._save()

    def set_status(self, name: str, status: str) -> None:
        with self._lock:
            cfg = self._configs.get(name)
            if cfg is not None and cfg["status"] != status:
                cfg["status"] = status
                self._save()


class _Waiter:
    __slots__ = ("event", "envelope", "error")

    def __init__(self):
        self.event = threading.Event()
        self.envelope: dict | None = None
        self.error: str | None = None


class MqttBridge:
    """Lazy MQTT connection shared by all request handlers.

    Reconnects on demand; a broker outage turns into TransportError on
    the next publish attempt rather than taking the service down.
    """

    def __init__(self, host: str, port: int, store: ConfigStore):
        self.host = host
        self.port = port
        self.store = store
        self._client: MqttClient | None = None
        self._lock = threading.Lock()
        self._waiters: dict[str, _Waiter] = {}

    @property
    def connected(self) -> bool:
        client = self._client
        return client is not None and client.connected

    def close(self) -> None:
        with self._lock:
            client, self._client = self._client, None
        if client is not None:
            client.close()

    def ensure(self) -> MqttClient:
        with self._lock:
            if self._client is not None and self._client.connected:
                return self._client
            if self._client is not None:
                self._client.close()
                self._client = None
            try:
                client = MqttClient(on_message=self._on_message)
                client.connect(self.host, self.port,
                               f"control-{uuid.uuid4().hex[:8]}")
                client.subscribe(TOPIC_STATUS, qos=1)
                client.subscribe(TOPIC_OUTPUT, qos=1)
            except (OSError, TransportError) as exc:
                raise TransportError(f"broker unreachable: {exc}") from exc
            self._client = client
            return client

    def publish(self, topic: str, body: dict) -> None:
        client = self.ensure()
        client.publish(topic, json.dumps(body).encode("utf-8"), qos=1)

    def register(self, correlation_id: str) -> _Waiter:
        waiter = _Waiter()
        with self._lock:
            self._waiters[correlation_id] = waiter
        return waiter

    def unregister(self, correlation_id: str) -> None:
        with self._lock:
            self._waiters.pop(correlation_id, None)

    def _resolve(self, correlation_id, envelope=None, error=None) -> None:
        if not isinstance(correlation_id, str):
            return
        with self._lock:
            waiter = self._waiters.pop(correlation_id, None)
        if waiter is not None:
            waiter.envelope = envelope
            waiter.error = error
            waiter.event.set()

    def _on_message(self, topic: str, payload: bytes) -> None:
        try:
            body = json.loads(payload.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return
        if not isinstance(body, dict):
            return
        if topic == TOPIC_OUTPUT:
            self._resolve(body.get("correlation_id"), envelope=body)
        elif topic == TOPIC_STATUS:
            event = body.get("event")
            name = body.get("name")
            if event == "started" and isinstance(name, str):
                self.store.set_status(name, "running")
            elif event == "stopped" and isinstance(name, str):
                self.store.set_status(name, "stopped")
            elif event == "error":
                self._resolve(body.get("correlation_id"),
                              error=body.get("reason", "collector error"))


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except (ValueError, UnicodeDecodeError):
        raise HTTPException(status_code=400, detail="request body must be JSON")
    if not isinstance(body, dict):
        raise HTTPException(status_code=400, detail="request body must be a JSON object")
    return body


def create_app(store_path: str | Path, broker_host: str, broker_port: int,
               download_timeout: float = 30.0,
               ui_dir: str | Path | None = None) -> FastAPI:
    """Build the service around a store file and a broker address."""
    store = ConfigStore(store_path)
    bridge = MqttBridge(broker_host, broker_port, store)

    @asynccontextmanager
    async def lifespan(_app):
        try:
            yield
        finally:
            bridge.close()

    app = FastAPI(title="csisuite control service", docs_url=None,
                  redoc_url=None, lifespan=lifespan)
    app.state.store = store
    app.state.bridge = bridge

    def need(name: str) -> dict:
        config = store.get(name)
        if config is None:
            raise HTTPException(status_code=404,
                                detail=f"no configuration named {name!r}")
        return config

    @app.get("/healthz")
    def healthz():
        try:
            bridge.ensure()
        except TransportError:
            pass
        return {"status": "ok", "broker_connected": bridge.connected}

    @app.get("/configs")
    def list_configs():
        return store.list()

    @app.post("/configs", status_code=201)
    async def create_config(request: Request):
        body = await _json_body(request)
        try:
            config = validate_config(body)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            return store.create(config)
        except ConfigError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/configs/{name}")
    def read_config(name: str):
        return need(name)

    @app.put("/configs/{name}")
    async def replace_config(name: str, request: Request):
        body = await _json_body(request)
        current = need(name)
        try:
            config = validate_config(body)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if config["name"] != name:
            raise HTTPException(status_code=400,
                                detail="name in body must match the URL")
        if current["status"] == "running":
            raise HTTPException(status_code=409,
                                detail="configuration is running; stop it first")
        return store.replace(name, config)

    @app.delete("/configs/{name}", status_code=204)
    def delete_config(name: str):
        config = need(name)
        if config["status"] == "running":
            raise HTTPException(status_code=409,
                                detail="configuration is running; stop it first")
        store.delete(name)
        return Response(status_code=204)

    @app.post("/configs/{name}/start")
    def start_config(name: str):
        config = need(name)
        if config["status"] == "running":
            raise HTTPException(status_code=409,
                                detail=f"configuration {name!r} is already running")
        message = {k: config[k] for k in
                   ("name", "description", "band", "bandwidth", "channel",
                    "device_filter")}
        try:
            bridge.publish(TOPIC_START, message)
        except TransportError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        store.set_status(name, "running")
        return store.get(name)

    @app.post("/configs/{name}/stop")
    def stop_config(name: str):
        config = need(name)
        if config["status"] != "running":
            raise HTTPException(status_code=409,
                                detail=f"configuration {name!r} is not running")
        try:
            bridge.publish(TOPIC_STOP, {"name": name})
        except TransportError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        store.set_status(name, "stopped")
        return store.get(name)

    @app.get("/configs/{name}/output")
    def download_output(name: str):
        need(name)
        correlation_id = uuid.uuid4().hex
        waiter = bridge.register(correlation_id)
        try:
            bridge.publish(TOPIC_DOWNLOAD,
                           {"name": name, "correlation_id": correlation_id})
        except TransportError as exc:
            bridge.unregister(correlation_id)
            raise HTTPException(status_code=503, detail=str(exc))
        if not waiter.event.wait(download_timeout):
            bridge.unregister(correlation_id)
            raise HTTPException(status_code=504,
                                detail="timed out waiting for the collector")
        if waiter.error is not None:
            raise HTTPException(status_code=502,
                                detail=f"collector error: {waiter.error}")
        envelope = waiter.envelope or {}
        try:
            data = base64.b64decode(envelope.get("payload", ""), validate=True)
        except (ValueError, TypeError):
            raise HTTPException(status_code=502,
                                detail="collector sent an undecodable payload")
        return Response(
            content=data, media_type="text/csv",
            headers={"Content-Disposition": f'attachment; filename="{name}.csv"'},
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
