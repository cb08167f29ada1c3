"""Threaded loopback MQTT broker.

One accept thread plus one reader thread per connection.  Messages are
routed synchronously: a PUBLISH is forwarded to every matching
subscriber before the publisher's PUBACK is sent, so once a QoS 1
publish returns, delivery to connected subscribers has happened.
"""
from __future__ import annotations

import socket
import threading

from ..errors import TransportError
from . import packets as pk


class _Session:
    def __init__(self, conn: socket.socket, addr):
        self.conn = conn
        self.addr = addr
        self.client_id = ""
        self.subscriptions: list[tuple[str, int]] = []
        self.send_lock = threading.Lock()
        self.alive = True
        self._next_pid = 0

    def send(self, data: bytes) -> None:
        with self.send_lock:
            self.conn.sendall(data)

    def next_pid(self) -> int:
        # only touched from the routing path, under the broker lock
        self._next_pid = self._next_pid % 65535 + 1
        return self._next_pid

    def max_qos(self, topic: str) -> int | None:
        best = None
        for pattern, qos in self.subscriptions:
            if pk.topic_matches(pattern, topic):
                best = qos if best is None else max(best, qos)
        return best

    def close(self) -> None:
        self.alive = False
        try:
            self.conn.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.conn.close()


class Broker:
    """An in-process broker bound to a loopback TCP port.

    ``port=0`` picks an ephemeral port; the bound port is available as
    ``broker.port`` right after construction.  Use as a context manager
    or call ``start()`` / ``close()`` explicitly.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(32)
        self.host, self.port = self._sock.getsockname()[:2]
        self._sessions: list[_Session] = []
        self._lock = threading.Lock()
        self._closed = False
        self._accept_thread: threading.Thread | None = None

    def start(self) -> "Broker":
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="mqtt-broker-accept", daemon=True
        )
        self._accept_thread.start()
        return self

    def __enter__(self) -> "Broker":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            sessions = list(self._sessions)
            self._sessions.clear()
        try:
            # close() alone does not wake a thread blocked in accept()
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        for session in sessions:
            session.close()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)

    def _accept_loop(self) -> None:
        while True:
            try:
                conn, addr = self._sock.accept()
            except OSError:
                return  # listener closed
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            session = _Session(conn, addr)
            threading.Thread(
                target=self._serve, args=(session,),
                name=f"mqtt-broker-{addr[1]}", daemon=True,
            ).start()

    def _serve(self, session: _Session) -> None:
        reader = session.conn.makefile("rb")

        def read_exact(n: int) -> bytes:
            data = reader.read(n)
            if data is None or len(data) != n:
                raise ConnectionError("peer closed")
            return data

        try:
            ptype, _, body = pk.read_packet(read_exact)
            if ptype != pk.CONNECT:
                return
            session.client_id, _, _ = pk.parse_connect(body)
            with self._lock:
                if self._closed:
                    return
                self._sessions.append(session)
            session.send(pk.encode_connack())
            while True:
                ptype, flags, body = pk.read_packet(read_exact)
                if ptype == pk.PUBLISH:
                    topic, payload, qos, pid = pk.parse_publish(flags, body)
                    self._route(topic, payload)
                    if qos == 1:
                        session.send(pk.encode_puback(pid))
                elif ptype == pk.SUBSCRIBE:
                    pid, filters = pk.parse_subscribe(body)
                    codes = []
                    for pattern, qos in filters:
                        if pk.valid_filter(pattern) and qos in (0, 1):
                            session.subscriptions.append((pattern, qos))
                            codes.append(qos)
                        else:
                            codes.append(0x80)
                    session.send(pk.encode_suback(pid, codes))
                elif ptype == pk.PUBACK:
                    pass  # QoS 1 delivery confirmed; nothing to retry
                elif ptype == pk.PINGREQ:
                    session.send(pk.encode_pingresp())
                elif ptype == pk.DISCONNECT:
                    return
                else:
                    raise TransportError(f"unexpected packet type {ptype}")
        except (ConnectionError, OSError, TransportError):
            pass
        finally:
            reader.close()
            session.close()
            with self._lock:
                if session in self._sessions:
                    self._sessions.remove(session)

    def _route(self, topic: str, payload: bytes) -> None:
        with self._lock:
            targets = []
            for session in self._sessions:
                qos = session.max_qos(topic)
                if qos is not None:
                    pid = session.next_pid() if qos else None
                    targets.append((session, qos, pid))
        for session, qos, pid in targets:
            try:
                session.send(pk.encode_publish(topic, payload, qos, pid))
            except OSError:
                pass  # reader thread will reap the session
