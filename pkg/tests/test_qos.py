"""Delivery-guarantee tests under packet loss.

The fault model drops each distinct control packet (by type and packet id)
exactly once per wire direction, which forces every retry path in the QoS 1
and QoS 2 handshakes to actually run.
"""
from __future__ import annotations

from uamsim.mqtt.packets import PacketType, decode_packet


class DropEachOnce:
    """Wire tap: the first sighting of each (type, packet id) is dropped.

    CONNECT/SUBSCRIBE handshakes have no retry path in MQTT, so the tap is
    armed only after setup is complete.
    """

    RETRYABLE = {PacketType.PUBLISH, PacketType.PUBACK, PacketType.PUBREC,
                 PacketType.PUBREL, PacketType.PUBCOMP}

    def __init__(self):
        self.armed = False
        self.seen: set[tuple[int, int | None]] = set()
        self.dropped = 0

    def __call__(self, frame: bytes) -> bool:
        if not self.armed:
            return True
        decoded = decode_packet(frame)
        assert decoded is not None, "tap should always see whole frames"
        packet, _ = decoded
        ptype = PacketType(frame[0] >> 4)
        if ptype not in self.RETRYABLE:
            return True
        key = (int(ptype), getattr(packet, "packet_id", None))
        if key in self.seen:
            return True
        self.seen.add(key)
        self.dropped += 1
        return False


def _lossy_pair(bus, client_id, **kwargs):
    client, inbox = bus.client(client_id, **kwargs)
    tap_out = DropEachOnce()
    tap_in = DropEachOnce()
    client.wire.tap = tap_out            # client -> broker
    client.wire._peer.tap = tap_in       # broker -> client
    return client, inbox, tap_out, tap_in


def _run_to_quiescence(bus, max_seconds=120):
    for _ in range(max_seconds):
        bus.run(1)
        if (bus.net.pending == 0
                and all(c.inflight_count == 0 for c in bus.clients if not c.closed)
                and all(not s.inflight for s in bus.broker._sessions.values())):
            return
    raise AssertionError("traffic never settled")


def test_qos1_delivers_at_least_once_under_loss(bus):
    pub, _, pub_out, pub_in = _lossy_pair(bus, "pub")
    sub, inbox, sub_out, sub_in = _lossy_pair(bus, "sub")
    bus.drain()
    sub.subscribe([("stream", 1)])
    bus.drain()
    for tap in (pub_out, pub_in, sub_out, sub_in):
        tap.armed = True

    total = 1000
    for i in range(total):
        pub.publish("stream", str(i).encode(), qos=1)
    _run_to_quiescence(bus)

    counts: dict[bytes, int] = {}
    dup_seen = False
    for _, payload, _, _, dup in inbox.messages:
        counts[payload] = counts.get(payload, 0) + 1
        dup_seen = dup_seen or dup
    assert set(counts) == {str(i).encode() for i in range(total)}
    assert all(n >= 1 for n in counts.values())
    assert len(inbox.messages) >= total
    assert dup_seen, "loss recovery must have produced DUP retries"
    assert sum(t.dropped for t in (pub_out, pub_in, sub_out, sub_in)) > 0


def test_qos2_delivers_exactly_once_under_loss(bus):
    pub, _, pub_out, pub_in = _lossy_pair(bus, "pub")
    sub, inbox, sub_out, sub_in = _lossy_pair(bus, "sub")
    bus.drain()
    sub.subscribe([("stream", 2)])
    bus.drain()
    for tap in (pub_out, pub_in, sub_out, sub_in):
        tap.armed = True

    total = 1000
    for i in range(total):
        pub.publish("stream", str(i).encode(), qos=2)
    _run_to_quiescence(bus)

    payloads = inbox.payloads()
    assert len(payloads) == total
    assert set(payloads) == {str(i).encode() for i in range(total)}
    assert sum(t.dropped for t in (pub_out, pub_in, sub_out, sub_in)) > 0


def test_qos1_clean_path_no_duplicates(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("stream", 1)])
    bus.drain()
    for i in range(50):
        pub.publish("stream", str(i).encode(), qos=1)
    bus.drain()
    assert inbox.payloads() == [str(i).encode() for i in range(50)]
    assert not any(dup for *_, dup in inbox.messages)


def test_retry_gives_up_after_limit(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("stream", 1)])
    bus.drain()
    sub.wire._peer.tap = lambda frame: (frame[0] >> 4) != PacketType.PUBLISH
    pub.publish("stream", b"m", qos=1)
    bus.run(10)
    # broker abandoned the unresponsive subscriber
    assert "sub" not in bus.broker._sessions
    assert inbox.messages == []
