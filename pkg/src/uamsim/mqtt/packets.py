"""MQTT 3.1.1 control packet model and wire codec.

Covers the subset the simulation backbone needs: all fourteen packet types,
QoS 0-2, retained flag, DUP, last-will metadata on CONNECT. Encoding is
strict; decoding rejects malformed input with ProtocolError rather than
guessing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Union

MAX_REMAINING_LENGTH = 268_435_455
DEFAULT_MAX_PACKET = 1_048_576  # 1 MiB cap on remaining length, configurable per broker


class ProtocolError(Exception):
    """Raised when bytes on the wire violate the protocol."""


class PacketType(IntEnum):
    CONNECT = 1
    CONNACK = 2
    PUBLISH = 3
    PUBACK = 4
    PUBREC = 5
    PUBREL = 6
    PUBCOMP = 7
    SUBSCRIBE = 8
    SUBACK = 9
    UNSUBSCRIBE = 10
    UNSUBACK = 11
    PINGREQ = 12
    PINGRESP = 13
    DISCONNECT = 14


class ConnectReturnCode(IntEnum):
    ACCEPTED = 0
    UNACCEPTABLE_PROTOCOL = 1
    IDENTIFIER_REJECTED = 2
    SERVER_UNAVAILABLE = 3
    BAD_CREDENTIALS = 4
    NOT_AUTHORIZED = 5


SUBACK_FAILURE = 0x80


@dataclass(frozen=True)
class Will:
    topic: str
    payload: bytes = b""
    qos: int = 0
    retain: bool = False


@dataclass(frozen=True)
class Connect:
    client_id: str
    clean_session: bool = True
    keepalive: int = 0
    will: Will | None = None
    username: str | None = None
    password: bytes | None = None


@dataclass(frozen=True)
class ConnAck:
    session_present: bool = False
    return_code: int = ConnectReturnCode.ACCEPTED


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes = b""
    qos: int = 0
    retain: bool = False
    dup: bool = False
    packet_id: int | None = None


@dataclass(frozen=True)
class PubAck:
    packet_id: int


@dataclass(frozen=True)
class PubRec:
    packet_id: int


@dataclass(frozen=True)
class PubRel:
    packet_id: int


@dataclass(frozen=True)
class PubComp:
    packet_id: int


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    # (topic filter, requested qos) pairs, order preserved
    filters: tuple[tuple[str, int], ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class SubAck:
    packet_id: int
    return_codes: tuple[int, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Unsubscribe:
    packet_id: int
    filters: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class UnsubAck:
    packet_id: int


@dataclass(frozen=True)
class PingReq:
    pass


@dataclass(frozen=True)
class PingResp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Union[
    Connect, ConnAck, Publish, PubAck, PubRec, PubRel, PubComp,
    Subscribe, SubAck, Unsubscribe, UnsubAck, PingReq, PingResp, Disconnect,
]


def encode_remaining_length(n: int) -> bytes:
    """Variable-length encoding: 7 bits per byte, continuation bit 0x80."""
    if not 0 <= n <= MAX_REMAINING_LENGTH:
        raise ProtocolError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        n, digit = divmod(n, 128)
        if n:
            out.append(digit | 0x80)
        else:
            out.append(digit)
            return bytes(out)


def decode_remaining_length(buf: bytes, offset: int = 0) -> tuple[int, int] | None:
    """Return (value, bytes consumed) or None if the buffer is short.

    More than four length bytes is malformed per the protocol.
    """
    value = 0
    for i in range(4):
        if offset + i >= len(buf):
            return None
        byte = buf[offset + i]
        value |= (byte & 0x7F) << (7 * i)
        if not byte & 0x80:
            return value, i + 1
    raise ProtocolError("remaining length uses more than 4 bytes")


def _utf8(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError("string exceeds 65535 bytes")
    return len(raw).to_bytes(2, "big") + raw


def _bin(b: bytes) -> bytes:
    if len(b) > 0xFFFF:
        raise ProtocolError("binary field exceeds 65535 bytes")
    return len(b).to_bytes(2, "big") + b


def _u16(n: int) -> bytes:
    return n.to_bytes(2, "big")


class _Reader:
    """Cursor over one packet's variable header + payload."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def u16(self) -> int:
        if self.remaining() < 2:
            raise ProtocolError("truncated integer field")
        v = int.from_bytes(self.data[self.pos:self.pos + 2], "big")
        self.pos += 2
        return v

    def u8(self) -> int:
        if self.remaining() < 1:
            raise ProtocolError("truncated byte field")
        v = self.data[self.pos]
        self.pos += 1
        return v

    def raw(self, n: int) -> bytes:
        if self.remaining() < n:
            raise ProtocolError("truncated field")
        v = self.data[self.pos:self.pos + n]
        self.pos += n
        return v

    def binary(self) -> bytes:
        return self.raw(self.u16())

    def string(self) -> str:
        raw = self.binary()
        try:
            s = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError("invalid UTF-8 in string field") from exc
        if "\x00" in s:
            raise ProtocolError("NUL byte in string field")
        return s

    def rest(self) -> bytes:
        v = self.data[self.pos:]
        self.pos = len(self.data)
        return v

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError("trailing bytes after packet body")


def _check_qos(qos: int) -> None:
    if qos not in (0, 1, 2):
        raise ProtocolError(f"invalid QoS {qos}")


def _check_packet_id(pid: int) -> None:
    if not 1 <= pid <= 0xFFFF:
        raise ProtocolError(f"packet id {pid} out of range")


def encode_packet(packet: Packet) -> bytes:
    """Serialize a packet to its full wire form (fixed header included)."""
    if isinstance(packet, Connect):
        body = _encode_connect(packet)
        return _frame(PacketType.CONNECT, 0, body)
    if isinstance(packet, ConnAck):
        body = bytes([1 if packet.session_present else 0, packet.return_code])
        return _frame(PacketType.CONNACK, 0, body)
    if isinstance(packet, Publish):
        return _encode_publish(packet)
    if isinstance(packet, PubAck):
        _check_packet_id(packet.packet_id)
        return _frame(PacketType.PUBACK, 0, _u16(packet.packet_id))
    if isinstance(packet, PubRec):
        _check_packet_id(packet.packet_id)
        return _frame(PacketType.PUBREC, 0, _u16(packet.packet_id))
    if isinstance(packet, PubRel):
        _check_packet_id(packet.packet_id)
        return _frame(PacketType.PUBREL, 0x02, _u16(packet.packet_id))
    if isinstance(packet, PubComp):
        _check_packet_id(packet.packet_id)
        return _frame(PacketType.PUBCOMP, 0, _u16(packet.packet_id))
    if isinstance(packet, Subscribe):
        return _encode_subscribe(packet)
    if isinstance(packet, SubAck):
        _check_packet_id(packet.packet_id)
        for code in packet.return_codes:
            if code not in (0, 1, 2, SUBACK_FAILURE):
                raise ProtocolError(f"invalid SUBACK return code {code:#x}")
        body = _u16(packet.packet_id) + bytes(packet.return_codes)
        return _frame(PacketType.SUBACK, 0, body)
    if isinstance(packet, Unsubscribe):
        _check_packet_id(packet.packet_id)
        if not packet.filters:
            raise ProtocolError("UNSUBSCRIBE requires at least one filter")
        body = _u16(packet.packet_id) + b"".join(_utf8(f) for f in packet.filters)
        return _frame(PacketType.UNSUBSCRIBE, 0x02, body)
    if isinstance(packet, UnsubAck):
        _check_packet_id(packet.packet_id)
        return _frame(PacketType.UNSUBACK, 0, _u16(packet.packet_id))
    if isinstance(packet, PingReq):
        return _frame(PacketType.PINGREQ, 0, b"")
    if isinstance(packet, PingResp):
        return _frame(PacketType.PINGRESP, 0, b"")
    if isinstance(packet, Disconnect):
        return _frame(PacketType.DISCONNECT, 0, b"")
    raise ProtocolError(f"cannot encode {type(packet).__name__}")


def _frame(ptype: PacketType, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + encode_remaining_length(len(body)) + body


def _encode_connect(p: Connect) -> bytes:
    flags = 0
    if p.clean_session:
        flags |= 0x02
    if p.will is not None:
        _check_qos(p.will.qos)
        flags |= 0x04 | (p.will.qos << 3)
        if p.will.retain:
            flags |= 0x20
    if p.password is not None and p.username is None:
        raise ProtocolError("password requires username")
    if p.username is not None:
        flags |= 0x80
    if p.password is not None:
        flags |= 0x40
    if not 0 <= p.keepalive <= 0xFFFF:
        raise ProtocolError(f"keepalive {p.keepalive} out of range")
    body = _utf8("MQTT") + bytes([0x04, flags]) + _u16(p.keepalive)
    body += _utf8(p.client_id)
    if p.will is not None:
        body += _utf8(p.will.topic) + _bin(p.will.payload)
    if p.username is not None:
        body += _utf8(p.username)
    if p.password is not None:
        body += _bin(p.password)
    return body


def _encode_publish(p: Publish) -> bytes:
    from .topics import valid_topic_name

    _check_qos(p.qos)
    if not valid_topic_name(p.topic):
        raise ProtocolError(f"invalid publish topic {p.topic!r}")
    flags = (p.qos << 1) | (0x01 if p.retain else 0) | (0x08 if p.dup else 0)
    if p.qos == 0 and p.dup:
        raise ProtocolError("DUP must be 0 on a QoS 0 publish")
    body = _utf8(p.topic)
    if p.qos > 0:
        if p.packet_id is None:
            raise ProtocolError("QoS > 0 publish requires a packet id")
        _check_packet_id(p.packet_id)
        body += _u16(p.packet_id)
    elif p.packet_id is not None:
        raise ProtocolError("QoS 0 publish must not carry a packet id")
    return _frame(PacketType.PUBLISH, flags, body + p.payload)


def _encode_subscribe(p: Subscribe) -> bytes:
    from .topics import valid_topic_filter

    _check_packet_id(p.packet_id)
    if not p.filters:
        raise ProtocolError("SUBSCRIBE requires at least one filter")
    body = _u16(p.packet_id)
    for topic_filter, qos in p.filters:
        _check_qos(qos)
        if not valid_topic_filter(topic_filter):
            raise ProtocolError(f"invalid topic filter {topic_filter!r}")
        body += _utf8(topic_filter) + bytes([qos])
    return _frame(PacketType.SUBSCRIBE, 0x02, body)


def decode_packet(buf: bytes | bytearray | memoryview,
                  max_packet: int = DEFAULT_MAX_PACKET) -> tuple[Packet, int] | None:
    """Decode one packet from the head of buf.

    Returns (packet, bytes consumed), or None when more bytes are needed.
    Raises ProtocolError for malformed input.
    """
    buf = bytes(buf)
    if not buf:
        return None
    first = buf[0]
    type_nibble = first >> 4
    flags = first & 0x0F
    if type_nibble in (0, 15):
        raise ProtocolError(f"reserved packet type {type_nibble}")
    ptype = PacketType(type_nibble)
    decoded = decode_remaining_length(buf, 1)
    if decoded is None:
        return None
    length, len_bytes = decoded
    if length > max_packet:
        raise ProtocolError(f"packet of {length} bytes exceeds limit {max_packet}")
    total = 1 + len_bytes + length
    if len(buf) < total:
        return None
    body = buf[1 + len_bytes:total]
    packet = _decode_body(ptype, flags, body)
    return packet, total


_EXPECT_FLAGS = {
    PacketType.CONNECT: 0, PacketType.CONNACK: 0, PacketType.PUBACK: 0,
    PacketType.PUBREC: 0, PacketType.PUBCOMP: 0, PacketType.SUBACK: 0,
    PacketType.UNSUBACK: 0, PacketType.PINGREQ: 0, PacketType.PINGRESP: 0,
    PacketType.DISCONNECT: 0, PacketType.PUBREL: 0x02,
    PacketType.SUBSCRIBE: 0x02, PacketType.UNSUBSCRIBE: 0x02,
}


def _decode_body(ptype: PacketType, flags: int, body: bytes) -> Packet:
    if ptype != PacketType.PUBLISH and flags != _EXPECT_FLAGS[ptype]:
        raise ProtocolError(f"bad flags {flags:#x} for {ptype.name}")
    r = _Reader(body)
    if ptype == PacketType.CONNECT:
        return _decode_connect(r)
    if ptype == PacketType.CONNACK:
        ack = ConnAck(session_present=bool(r.u8() & 0x01), return_code=r.u8())
        r.expect_end()
        return ack
    if ptype == PacketType.PUBLISH:
        return _decode_publish(flags, r)
    if ptype in (PacketType.PUBACK, PacketType.PUBREC, PacketType.PUBREL,
                 PacketType.PUBCOMP, PacketType.UNSUBACK):
        pid = r.u16()
        _check_packet_id(pid)
        r.expect_end()
        cls = {PacketType.PUBACK: PubAck, PacketType.PUBREC: PubRec,
               PacketType.PUBREL: PubRel, PacketType.PUBCOMP: PubComp,
               PacketType.UNSUBACK: UnsubAck}[ptype]
        return cls(packet_id=pid)
    if ptype == PacketType.SUBSCRIBE:
        return _decode_subscribe(r)
    if ptype == PacketType.SUBACK:
        pid = r.u16()
        _check_packet_id(pid)
        codes = tuple(r.rest())
        if not codes:
            raise ProtocolError("SUBACK carries no return codes")
        for code in codes:
            if code not in (0, 1, 2, SUBACK_FAILURE):
                raise ProtocolError(f"invalid SUBACK return code {code:#x}")
        return SubAck(packet_id=pid, return_codes=codes)
    if ptype == PacketType.UNSUBSCRIBE:
        pid = r.u16()
        _check_packet_id(pid)
        filters = []
        while r.remaining():
            filters.append(r.string())
        if not filters:
            raise ProtocolError("UNSUBSCRIBE carries no filters")
        return Unsubscribe(packet_id=pid, filters=tuple(filters))
    if ptype == PacketType.PINGREQ:
        r.expect_end()
        return PingReq()
    if ptype == PacketType.PINGRESP:
        r.expect_end()
        return PingResp()
    r.expect_end()
    return Disconnect()


def _decode_connect(r: _Reader) -> Connect:
    name = r.string()
    level = r.u8()
    if name != "MQTT" or level != 0x04:
        raise ProtocolError(f"unsupported protocol {name!r} level {level}")
    flags = r.u8()
    if flags & 0x01:
        raise ProtocolError("CONNECT reserved flag set")
    keepalive = r.u16()
    client_id = r.string()
    will = None
    if flags & 0x04:
        will_qos = (flags >> 3) & 0x03
        _check_qos(will_qos)
        will_topic = r.string()
        will_payload = r.binary()
        will = Will(topic=will_topic, payload=will_payload,
                    qos=will_qos, retain=bool(flags & 0x20))
    elif flags & 0x38:
        raise ProtocolError("will qos/retain set without will flag")
    username = r.string() if flags & 0x80 else None
    password = r.binary() if flags & 0x40 else None
    if password is not None and username is None:
        raise ProtocolError("password flag without username flag")
    r.expect_end()
    return Connect(client_id=client_id, clean_session=bool(flags & 0x02),
                   keepalive=keepalive, will=will,
                   username=username, password=password)


def _decode_publish(flags: int, r: _Reader) -> Publish:
    from .topics import valid_topic_name

    qos = (flags >> 1) & 0x03
    _check_qos(qos)
    dup = bool(flags & 0x08)
    if qos == 0 and dup:
        raise ProtocolError("DUP set on a QoS 0 publish")
    topic = r.string()
    if not valid_topic_name(topic):
        raise ProtocolError(f"invalid publish topic {topic!r}")
    pid = None
    if qos > 0:
        pid = r.u16()
        _check_packet_id(pid)
    return Publish(topic=topic, payload=r.rest(), qos=qos,
                   retain=bool(flags & 0x01), dup=dup, packet_id=pid)


def _decode_subscribe(r: _Reader) -> Subscribe:
    from .topics import valid_topic_filter

    pid = r.u16()
    _check_packet_id(pid)
    filters = []
    while r.remaining():
        topic_filter = r.string()
        qos = r.u8()
        _check_qos(qos)
        if not valid_topic_filter(topic_filter):
            raise ProtocolError(f"invalid topic filter {topic_filter!r}")
        filters.append((topic_filter, qos))
    if not filters:
        raise ProtocolError("SUBSCRIBE carries no filters")
    return Subscribe(packet_id=pid, filters=tuple(filters))


class StreamDecoder:
    """Incremental decoder for a byte stream carrying back-to-back packets."""

    def __init__(self, max_packet: int = DEFAULT_MAX_PACKET):
        self._buf = bytearray()
        self._max_packet = max_packet

    def feed(self, data: bytes) -> list[Packet]:
        self._buf.extend(data)
        out: list[Packet] = []
        while True:
            decoded = decode_packet(self._buf, self._max_packet)
            if decoded is None:
                return out
            packet, used = decoded
            del self._buf[:used]
            out.append(packet)
