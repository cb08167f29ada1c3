"""Blocking MQTT client with a background reader thread.

``subscribe`` and QoS 1 ``publish`` block until the broker's
acknowledgement arrives.  Incoming messages are handed to the
``on_message`` callback from the reader thread, so callbacks must not
block for long and must not call back into the client from a way that
would deadlock on the socket lock (publishing from a callback is fine).
"""
from __future__ import annotations

import socket
import threading
from typing import Callable

from ..errors import StateError, TransportError
from . import packets as pk

MessageHandler = Callable[[str, bytes], None]

_ACK_TIMEOUT = 10.0


class MqttClient:
    def __init__(self, on_message: MessageHandler | None = None):
        self.on_message = on_message
        self._sock: socket.socket | None = None
        self._reader = None
        self._reader_thread: threading.Thread | None = None
        self._ping_thread: threading.Thread | None = None
        self._send_lock = threading.Lock()
        self._pending_lock = threading.Lock()
        self._pending: dict[int, threading.Event] = {}
        self._next_pid = 0
        self._connack = threading.Event()
        self._connack_code = -1
        self._stop = threading.Event()
        self._dead = threading.Event()
        self._closed = False

    # -- lifecycle ----------------------------------------------------

    def connect(self, host: str, port: int, client_id: str,
                keepalive: int = 30) -> "MqttClient":
        if self._sock is not None:
            raise StateError("client already connected")
        sock = socket.create_connection((host, port), timeout=_ACK_TIMEOUT)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        self._reader = sock.makefile("rb")
        self._reader_thread = threading.Thread(
            target=self._read_loop, name=f"mqtt-{client_id}-reader", daemon=True
        )
        self._reader_thread.start()
        self._send(pk.encode_connect(client_id, keepalive))
        if not self._connack.wait(_ACK_TIMEOUT):
            self.close()
            raise TransportError("timed out waiting for CONNACK")
        if self._dead.is_set() and self._connack_code != 0:
            self.close()
            raise TransportError("connection closed during handshake")
        if self._connack_code != 0:
            self.close()
            raise TransportError(f"connection refused, code {self._connack_code}")
        sock.settimeout(None)
        if keepalive > 0:
            self._ping_thread = threading.Thread(
                target=self._ping_loop, args=(keepalive / 2,),
                name=f"mqtt-{client_id}-ping", daemon=True,
            )
            self._ping_thread.start()
        return self

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._stop.set()
        if self._sock is not None:
            try:
                self._send(pk.encode_disconnect())
            except (OSError, TransportError):
                pass
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()
        if self._reader_thread is not None and \
                self._reader_thread is not threading.current_thread():
            self._reader_thread.join(timeout=5)

    def __enter__(self) -> "MqttClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def connected(self) -> bool:
        return self._connack.is_set() and self._connack_code == 0 \
            and not self._closed and not self._dead.is_set()

    # -- operations ---------------------------------------------------

    def subscribe(self, topic: str, qos: int = 1) -> None:
        pid, event = self._register_ack()
        self._send(pk.encode_subscribe(pid, [(topic, qos)]))
        self._await_ack(pid, event, f"SUBACK on {topic!r}")

    def publish(self, topic: str, payload: bytes, qos: int = 0) -> None:
        if qos == 0:
            self._send(pk.encode_publish(topic, payload, 0))
            return
        pid, event = self._register_ack()
        self._send(pk.encode_publish(topic, payload, 1, pid))
        self._await_ack(pid, event, f"PUBACK on {topic!r}")

    # -- internals ----------------------------------------------------

    def _send(self, data: bytes) -> None:
        if self._sock is None:
            raise StateError("client not connected")
        try:
            with self._send_lock:
                self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _await_ack(self, pid: int, event: threading.Event, what: str) -> None:
        # an ack registered after the reader died is never resolved, so the
        # dead flag must short-circuit the wait
        if not self._dead.is_set() and not event.wait(_ACK_TIMEOUT):
            self._drop_ack(pid)
            raise TransportError(f"timed out waiting for {what}")
        if self._dead.is_set():
            self._drop_ack(pid)
            raise TransportError(f"connection lost waiting for {what}")

    def _register_ack(self) -> tuple[int, threading.Event]:
        with self._pending_lock:
            self._next_pid = self._next_pid % 65535 + 1
            pid = self._next_pid
            event = threading.Event()
            self._pending[pid] = event
        return pid, event

    def _drop_ack(self, pid: int) -> None:
        with self._pending_lock:
            self._pending.pop(pid, None)

    def _complete_ack(self, pid: int) -> None:
        with self._pending_lock:
            event = self._pending.pop(pid, None)
        if event is not None:
            event.set()

    def _read_loop(self) -> None:
        reader = self._reader

        def read_exact(n: int) -> bytes:
            data = reader.read(n)
            if data is None or len(data) != n:
                raise ConnectionError("connection closed")
            return data

        try:
            while not self._stop.is_set():
                ptype, flags, body = pk.read_packet(read_exact)
                if ptype == pk.CONNACK:
                    self._connack_code = pk.parse_connack(body)
                    self._connack.set()
                elif ptype == pk.PUBLISH:
                    topic, payload, qos, pid = pk.parse_publish(flags, body)
                    if qos == 1:
                        self._send(pk.encode_puback(pid))
                    if self.on_message is not None:
                        self.on_message(topic, payload)
                elif ptype in (pk.PUBACK, pk.SUBACK):
                    pid = pk.parse_puback(body) if ptype == pk.PUBACK \
                        else pk.parse_suback(body)[0]
                    self._complete_ack(pid)
                elif ptype == pk.PINGRESP:
                    pass
                else:
                    raise TransportError(f"unexpected packet type {ptype}")
        except (ConnectionError, OSError, TransportError):
            pass
        finally:
            self._dead.set()
            # unblock anyone waiting on an ack that will never come
            with self._pending_lock:
                pending = list(self._pending.values())
                self._pending.clear()
            for event in pending:
                event.set()
            self._connack.set()

    def _ping_loop(self, interval: float) -> None:
        while not self._stop.wait(interval):
            try:
                self._send(pk.encode_pingreq())
            except (TransportError, StateError):
                return
