"""MQTT client sharing the broker's wire discipline.

The client owns one wire, keeps QoS bookkeeping symmetrical to the broker's
(retry on a fixed interval, abort after too many attempts) and deduplicates
inbound QoS 2 publishes so the application sees them exactly once.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from .packets import (
    ConnAck, Connect, ConnectReturnCode, Disconnect, Packet, PingReq,
    PingResp, ProtocolError, PubAck, PubComp, Publish, PubRec, PubRel,
    StreamDecoder, SubAck, Subscribe, UnsubAck, Unsubscribe, Will,
    encode_packet,
)

log = logging.getLogger(__name__)

MessageHandler = Callable[[str, bytes, int, bool, bool], None]


@dataclass
class _OutFlight:
    packet_id: int
    topic: str
    payload: bytes
    qos: int
    retain: bool
    awaiting: str  # "puback" | "pubrec" | "pubcomp"
    deadline_ms: int
    retries: int = 0


class MqttClient:
    """One client session over an already-opened wire."""

    def __init__(self, wire, client_id: str, clock: Callable[[], int],
                 on_message: MessageHandler | None = None,
                 will: Will | None = None, keepalive: int = 0,
                 retry_interval_ms: int = 1_000, max_retries: int = 5):
        self.wire = wire
        self.client_id = client_id
        self.clock = clock
        self.on_message = on_message
        self.will = will
        self.keepalive = keepalive
        self.retry_interval_ms = retry_interval_ms
        self.max_retries = max_retries
        self.connected = False
        self.closed = False
        self.on_disconnect: Callable[[], None] | None = None
        self._decoder = StreamDecoder()
        self._inflight: dict[int, _OutFlight] = {}
        self._incoming_qos2: set[int] = set()
        self._granted: dict[str, int] = {}
        self._pending_subscribes: dict[int, tuple[tuple[str, int], ...]] = {}
        self._next_pid = 0
        wire.set_receiver(self._feed)
        wire.set_on_close(self._on_wire_closed)

    # -- lifecycle ----------------------------------------------------------

    def connect(self) -> None:
        self._send(Connect(client_id=self.client_id, clean_session=True,
                           keepalive=self.keepalive, will=self.will))

    def disconnect(self) -> None:
        if not self.closed:
            self._send(Disconnect())
            self.closed = True
            self.connected = False
            self.wire.close()

    def ping(self) -> None:
        self._send(PingReq())

    # -- application API ----------------------------------------------------

    def subscribe(self, filters: list[tuple[str, int]]) -> int:
        packet_id = self._alloc_pid()
        self._pending_subscribes[packet_id] = tuple(filters)
        self._send(Subscribe(packet_id=packet_id, filters=tuple(filters)))
        return packet_id

    def unsubscribe(self, filters: list[str]) -> int:
        packet_id = self._alloc_pid()
        for topic_filter in filters:
            self._granted.pop(topic_filter, None)
        self._send(Unsubscribe(packet_id=packet_id, filters=tuple(filters)))
        return packet_id

    def publish(self, topic: str, payload: bytes, qos: int = 0,
                retain: bool = False) -> int | None:
        if qos == 0:
            self._send(Publish(topic=topic, payload=payload, retain=retain))
            return None
        packet_id = self._alloc_pid()
        self._inflight[packet_id] = _OutFlight(
            packet_id=packet_id, topic=topic, payload=payload, qos=qos,
            retain=retain, awaiting="puback" if qos == 1 else "pubrec",
            deadline_ms=self.clock() + self.retry_interval_ms)
        self._send(Publish(topic=topic, payload=payload, qos=qos,
                           retain=retain, packet_id=packet_id))
        return packet_id

    @property
    def granted(self) -> dict[str, int]:
        """Topic filters the broker has acknowledged, with granted QoS."""
        return dict(self._granted)

    @property
    def inflight_count(self) -> int:
        return len(self._inflight)

    # -- time ---------------------------------------------------------------

    def on_time(self, now_ms: int) -> None:
        if self.closed:
            return
        for flight in list(self._inflight.values()):
            if now_ms < flight.deadline_ms:
                continue
            if flight.retries >= self.max_retries:
                log.warning("%s: giving up on packet %d", self.client_id,
                            flight.packet_id)
                self._teardown()
                return
            flight.retries += 1
            flight.deadline_ms = now_ms + self.retry_interval_ms
            if flight.awaiting == "pubcomp":
                self._send(PubRel(packet_id=flight.packet_id))
            else:
                self._send(Publish(topic=flight.topic, payload=flight.payload,
                                   qos=flight.qos, retain=flight.retain,
                                   dup=True, packet_id=flight.packet_id))

    # -- wire input ---------------------------------------------------------

    def _feed(self, data: bytes) -> None:
        if self.closed:
            return
        try:
            packets = self._decoder.feed(data)
        except ProtocolError as exc:
            log.warning("%s: protocol error: %s", self.client_id, exc)
            self._teardown()
            return
        for packet in packets:
            self._handle(packet)
            if self.closed:
                break

    def _handle(self, packet: Packet) -> None:
        if isinstance(packet, ConnAck):
            if packet.return_code != ConnectReturnCode.ACCEPTED:
                log.warning("%s: connection refused (%d)", self.client_id,
                            packet.return_code)
                self._teardown()
            else:
                self.connected = True
        elif isinstance(packet, Publish):
            self._on_publish(packet)
        elif isinstance(packet, PubAck):
            flight = self._inflight.get(packet.packet_id)
            if flight is not None and flight.awaiting == "puback":
                del self._inflight[packet.packet_id]
        elif isinstance(packet, PubRec):
            flight = self._inflight.get(packet.packet_id)
            if flight is not None and flight.awaiting == "pubrec":
                flight.awaiting = "pubcomp"
                flight.retries = 0
                flight.deadline_ms = self.clock() + self.retry_interval_ms
            self._send(PubRel(packet_id=packet.packet_id))
        elif isinstance(packet, PubRel):
            self._incoming_qos2.discard(packet.packet_id)
            self._send(PubComp(packet_id=packet.packet_id))
        elif isinstance(packet, PubComp):
            flight = self._inflight.get(packet.packet_id)
            if flight is not None and flight.awaiting == "pubcomp":
                del self._inflight[packet.packet_id]
        elif isinstance(packet, SubAck):
            filters = self._pending_subscribes.pop(packet.packet_id, ())
            for (topic_filter, _), code in zip(filters, packet.return_codes):
                if code != 0x80:
                    self._granted[topic_filter] = code
        elif isinstance(packet, (UnsubAck, PingResp)):
            pass
        else:
            log.warning("%s: unexpected %s from broker", self.client_id,
                        type(packet).__name__)
            self._teardown()

    def _on_publish(self, packet: Publish) -> None:
        if packet.qos == 0:
            self._deliver(packet)
        elif packet.qos == 1:
            self._deliver(packet)
            self._send(PubAck(packet_id=packet.packet_id))
        else:
            if packet.packet_id not in self._incoming_qos2:
                self._incoming_qos2.add(packet.packet_id)
                self._deliver(packet)
            self._send(PubRec(packet_id=packet.packet_id))

    def _deliver(self, packet: Publish) -> None:
        if self.on_message is not None:
            self.on_message(packet.topic, packet.payload, packet.qos,
                            packet.retain, packet.dup)

    # -- internals ----------------------------------------------------------

    def _alloc_pid(self) -> int:
        for _ in range(0xFFFF):
            self._next_pid = self._next_pid % 0xFFFF + 1
            if (self._next_pid not in self._inflight
                    and self._next_pid not in self._pending_subscribes):
                return self._next_pid
        raise RuntimeError("no free packet ids")

    def _send(self, packet: Packet) -> None:
        if not self.closed:
            self.wire.send(encode_packet(packet))

    def _on_wire_closed(self) -> None:
        self._teardown(close_wire=False)

    def _teardown(self, close_wire: bool = True) -> None:
        if self.closed:
            return
        self.closed = True
        self.connected = False
        if close_wire:
            self.wire.close()
        if self.on_disconnect is not None:
            self.on_disconnect()
