"""A minimal MQTT 3.1.1 client built straight from the public protocol tables.

Shares nothing with src/: frames are assembled and parsed by hand here, so
any disagreement with the package is a real wire-format finding. Blocking
sockets, QoS 0/1 subscribe side only; that is all the interop checks need.
"""
from __future__ import annotations

import socket


def u16(n: int) -> bytes:
    return bytes([n >> 8, n & 0xFF])


def mqtt_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return u16(len(raw)) + raw


def varint(n: int) -> bytes:
    out = bytearray()
    while True:
        n, digit = divmod(n, 128)
        out.append(digit | (0x80 if n else 0))
        if not n:
            return bytes(out)


def connect_frame(client_id: str, keepalive: int = 0) -> bytes:
    body = mqtt_string("MQTT") + bytes([0x04, 0x02]) + u16(keepalive)
    body += mqtt_string(client_id)
    return bytes([0x10]) + varint(len(body)) + body


def subscribe_frame(packet_id: int, topic_filter: str, qos: int) -> bytes:
    body = u16(packet_id) + mqtt_string(topic_filter) + bytes([qos])
    return bytes([0x82]) + varint(len(body)) + body


def publish_frame(topic: str, payload: bytes, qos: int = 0,
                  retain: bool = False, packet_id: int | None = None) -> bytes:
    flags = (qos << 1) | (1 if retain else 0)
    body = mqtt_string(topic)
    if qos:
        assert packet_id is not None
        body += u16(packet_id)
    body += payload
    return bytes([0x30 | flags]) + varint(len(body)) + body


def puback_frame(packet_id: int) -> bytes:
    return bytes([0x40, 0x02]) + u16(packet_id)


DISCONNECT_FRAME = bytes([0xE0, 0x00])
CONNACK_OK = bytes([0x20, 0x02, 0x00, 0x00])


class RawMqttProbe:
    """Blocking-socket probe that speaks just enough 3.1.1 to subscribe."""

    def __init__(self, host: str, port: int, client_id: str = "probe",
                 timeout_s: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout_s)
        self.sock.settimeout(timeout_s)
        self.client_id = client_id

    def _read_exact(self, n: int) -> bytes:
        chunks = bytearray()
        while len(chunks) < n:
            chunk = self.sock.recv(n - len(chunks))
            if not chunk:
                raise ConnectionError("peer closed the socket")
            chunks.extend(chunk)
        return bytes(chunks)

    def read_frame(self) -> bytes:
        """One whole control packet, fixed header included."""
        first = self._read_exact(1)
        length = 0
        shift = 0
        length_bytes = bytearray()
        while True:
            byte = self._read_exact(1)
            length_bytes.extend(byte)
            length |= (byte[0] & 0x7F) << shift
            if not byte[0] & 0x80:
                break
            shift += 7
            if shift > 21:
                raise ValueError("remaining length too long")
        return first + bytes(length_bytes) + self._read_exact(length)

    def connect(self) -> bytes:
        self.sock.sendall(connect_frame(self.client_id))
        return self.read_frame()

    def subscribe(self, topic_filter: str, qos: int, packet_id: int = 1) -> bytes:
        self.sock.sendall(subscribe_frame(packet_id, topic_filter, qos))
        return self.read_frame()

    def publish_qos0(self, topic: str, payload: bytes,
                     retain: bool = False) -> None:
        self.sock.sendall(publish_frame(topic, payload, qos=0, retain=retain))

    def receive_publish(self) -> dict:
        """Read one PUBLISH, ack it if QoS 1, return its parsed pieces."""
        frame = self.read_frame()
        parsed = parse_publish(frame)
        if parsed["qos"] == 1:
            self.sock.sendall(puback_frame(parsed["packet_id"]))
        return parsed | {"frame": frame}

    def disconnect(self) -> None:
        try:
            self.sock.sendall(DISCONNECT_FRAME)
        finally:
            self.sock.close()


def parse_publish(frame: bytes) -> dict:
    assert frame[0] >> 4 == 3, f"not a PUBLISH: {frame[0]:#x}"
    flags = frame[0] & 0x0F
    qos = (flags >> 1) & 0x03
    idx = 1
    length = 0
    shift = 0
    while True:
        byte = frame[idx]
        idx += 1
        length |= (byte & 0x7F) << shift
        if not byte & 0x80:
            break
        shift += 7
    body = frame[idx:]
    assert len(body) == length, "frame length mismatch"
    topic_len = (body[0] << 8) | body[1]
    topic = body[2:2 + topic_len].decode("utf-8")
    pos = 2 + topic_len
    packet_id = None
    if qos:
        packet_id = (body[pos] << 8) | body[pos + 1]
        pos += 2
    return {
        "topic": topic,
        "payload": body[pos:],
        "qos": qos,
        "retain": bool(flags & 0x01),
        "dup": bool(flags & 0x08),
        "packet_id": packet_id,
    }
