"""MQTT 3.1.1 control packet encoding and decoding.

Only the packet types used by this package are implemented.  Encoders
return complete packets (fixed header included); parsers take the fixed
header flags and the remaining bytes as produced by :func:`read_packet`.
"""
from __future__ import annotations

import struct

from ..errors import TransportError

CONNECT = 1
CONNACK = 2
PUBLISH = 3
PUBACK = 4
SUBSCRIBE = 8
SUBACK = 9
PINGREQ = 12
PINGRESP = 13
DISCONNECT = 14

PROTOCOL_NAME = b"MQTT"
PROTOCOL_LEVEL = 4  # 3.1.1
MAX_REMAINING = 268_435_455


def encode_varint(n: int) -> bytes:
    if not 0 <= n <= MAX_REMAINING:
        raise TransportError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        n, digit = divmod(n, 128)
        out.append(digit | (0x80 if n else 0))
        if not n:
            return bytes(out)


def _utf8(text: str) -> bytes:
    data = text.encode("utf-8")
    if len(data) > 0xFFFF:
        raise TransportError("string too long for MQTT encoding")
    return struct.pack(">H", len(data)) + data


class _Cursor:
    """Sequential reader over one packet's remaining bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TransportError("truncated MQTT packet")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    def rest(self) -> bytes:
        out = self.data[self.pos:]
        self.pos = len(self.data)
        return out

    def done(self) -> bool:
        return self.pos == len(self.data)


def _packet(ptype: int, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + encode_varint(len(body)) + body


def encode_connect(client_id: str, keepalive: int, clean: bool = True) -> bytes:
    flags = 0x02 if clean else 0x00
    body = (
        _utf8("MQTT")
        + bytes([PROTOCOL_LEVEL, flags])
        + struct.pack(">H", keepalive)
        + _utf8(client_id)
    )
    return _packet(CONNECT, 0, body)


def parse_connect(body: bytes) -> tuple[str, int, bool]:
    """-> (client_id, keepalive, clean_session)."""
    cur = _Cursor(body)
    name = cur.take(cur.u16())
    if name != PROTOCOL_NAME:
        raise TransportError(f"unsupported protocol {name!r}")
    level = cur.take(1)[0]
    if level != PROTOCOL_LEVEL:
        raise TransportError(f"unsupported protocol level {level}")
    flags = cur.take(1)[0]
    if flags & 0xFC:
        raise TransportError("CONNECT with will/auth flags is not supported")
    keepalive = cur.u16()
    client_id = cur.string()
    return client_id, keepalive, bool(flags & 0x02)


def encode_connack(session_present: bool = False, code: int = 0) -> bytes:
    return _packet(CONNACK, 0, bytes([1 if session_present else 0, code]))


def parse_connack(body: bytes) -> int:
    cur = _Cursor(body)
    cur.take(1)
    return cur.take(1)[0]


def encode_publish(
    topic: str,
    payload: bytes,
    qos: int = 0,
    packet_id: int | None = None,
    dup: bool = False,
) -> bytes:
    if qos not in (0, 1):
        raise TransportError(f"unsupported QoS {qos}")
    if qos and packet_id is None:
        raise TransportError("QoS 1 publish needs a packet id")
    flags = (0x08 if dup else 0) | (qos << 1)
    body = _utf8(topic)
    if qos:
        body += struct.pack(">H", packet_id)
    return _packet(PUBLISH, flags, body + payload)


def parse_publish(flags: int, body: bytes) -> tuple[str, bytes, int, int | None]:
    """-> (topic, payload, qos, packet_id)."""
    qos = (flags >> 1) & 0x03
    if qos > 1:
        raise TransportError(f"unsupported QoS {qos}")
    cur = _Cursor(body)
    topic = cur.string()
    packet_id = cur.u16() if qos else None
    return topic, cur.rest(), qos, packet_id


def encode_puback(packet_id: int) -> bytes:
    return _packet(PUBACK, 0, struct.pack(">H", packet_id))


def parse_puback(body: bytes) -> int:
    return _Cursor(body).u16()


def encode_subscribe(packet_id: int, filters) -> bytes:
    body = bytearray(struct.pack(">H", packet_id))
    for topic, qos in filters:
        body += _utf8(topic)
        body.append(qos)
    return _packet(SUBSCRIBE, 0x02, bytes(body))


def parse_subscribe(body: bytes) -> tuple[int, list[tuple[str, int]]]:
    cur = _Cursor(body)
    packet_id = cur.u16()
    filters = []
    while not cur.done():
        topic = cur.string()
        filters.append((topic, cur.take(1)[0]))
    if not filters:
        raise TransportError("SUBSCRIBE without filters")
    return packet_id, filters


def encode_suback(packet_id: int, codes) -> bytes:
    return _packet(SUBACK, 0, struct.pack(">H", packet_id) + bytes(codes))


def parse_suback(body: bytes) -> tuple[int, bytes]:
    cur = _Cursor(body)
    return cur.u16(), cur.rest()


def encode_pingreq() -> bytes:
    return _packet(PINGREQ, 0, b"")


def encode_pingresp() -> bytes:
    return _packet(PINGRESP, 0, b"")


def encode_disconnect() -> bytes:
    return _packet(DISCONNECT, 0, b"")


def read_packet(read_exact) -> tuple[int, int, bytes]:
    """Read one packet via ``read_exact(n) -> bytes``.

    Returns (type, flags, remaining bytes).  Raises TransportError on a
    malformed length; propagates whatever ``read_exact`` raises on EOF.
    """
    first = read_exact(1)[0]
    ptype, flags = first >> 4, first & 0x0F
    length = 0
    shift = 1
    while True:
        digit = read_exact(1)[0]
        length += (digit & 0x7F) * shift
        if not digit & 0x80:
            break
        shift *= 128
        if shift > 128 ** 3:
            raise TransportError("malformed remaining length")
    return ptype, flags, read_exact(length) if length else b""


def valid_filter(pattern: str) -> bool:
    """True for a well-formed topic filter per the 3.1.1 rules."""
    if not pattern:
        return False
    levels = pattern.split("/")
    for i, level in enumerate(levels):
        if "#" in level:
            if level != "#" or i != len(levels) - 1:
                return False
        if "+" in level and level != "+":
            return False
    return True


def topic_matches(pattern: str, topic: str) -> bool:
    """MQTT filter matching: + is one level, # the (possibly empty) rest."""
    if topic.startswith("$") and pattern and pattern[0] in "+#":
        return False
    plevels = pattern.split("/")
    tlevels = topic.split("/")
    for i, p in enumerate(plevels):
        if p == "#":
            return True
        if i >= len(tlevels):
            return False
        if p != "+" and p != tlevels[i]:
            return False
    return len(plevels) == len(tlevels)
