"""Transport-agnostic MQTT 3.1.1 broker.

Sessions are always clean (the subset has no persistence), QoS 0/1/2 are
fully handshaked, retained messages and last-will testaments work as in the
full protocol. The broker never sleeps: callers feed it bytes through wires
and drive retransmission by calling on_time() with the current clock.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable

from .packets import (
    ConnAck, Connect, ConnectReturnCode, Disconnect, Packet, PingReq,
    PingResp, ProtocolError, PubAck, PubComp, Publish, PubRec, PubRel,
    StreamDecoder, SubAck, Subscribe, UnsubAck, Unsubscribe, Will,
    encode_packet, DEFAULT_MAX_PACKET,
)
from .topics import topic_matches

log = logging.getLogger(__name__)

RETRY_INTERVAL_MS = 1_000
MAX_RETRIES = 5


@dataclass
class _OutFlight:
    """An outbound QoS>0 message awaiting its acknowledgement."""
    packet_id: int
    topic: str
    payload: bytes
    qos: int
    retain: bool
    awaiting: str  # "puback" | "pubrec" | "pubcomp"
    deadline_ms: int
    retries: int = 0


class _Session:
    def __init__(self, client_id: str):
        self.client_id = client_id
        self.conn: _Conn | None = None
        self.subscriptions: dict[str, int] = {}
        self.inflight: dict[int, _OutFlight] = {}
        self.incoming_qos2: set[int] = set()
        self._next_pid = 0

    def alloc_packet_id(self) -> int:
        for _ in range(0xFFFF):
            self._next_pid = self._next_pid % 0xFFFF + 1
            if self._next_pid not in self.inflight:
                return self._next_pid
        raise RuntimeError("no free packet ids")

    def granted_qos_for(self, topic: str) -> int | None:
        best: int | None = None
        for topic_filter, granted in self.subscriptions.items():
            if topic_matches(topic_filter, topic):
                best = granted if best is None else max(best, granted)
        return best


class _Conn:
    """One transport connection being parsed and state-tracked."""

    def __init__(self, broker: Broker, wire):
        self.broker = broker
        self.wire = wire
        self.decoder = StreamDecoder(broker.max_packet)
        self.session: _Session | None = None
        self.will: Will | None = None
        self.keepalive_ms = 0
        self.last_rx_ms = broker.clock()
        self.closing = False

    def feed(self, data: bytes) -> None:
        with self.broker._lock:
            if self.closing:
                return
            self.last_rx_ms = self.broker.clock()
            try:
                packets = self.decoder.feed(data)
            except ProtocolError as exc:
                log.warning("protocol error from %s: %s", self._name(), exc)
                self.broker._abort(self)
                return
            for packet in packets:
                if self.closing:
                    break
                try:
                    self.broker._handle(self, packet)
                except ProtocolError as exc:
                    log.warning("rejected packet from %s: %s", self._name(), exc)
                    self.broker._abort(self)
                    break

    def send(self, packet: Packet) -> None:
        self.wire.send(encode_packet(packet))

    def on_transport_close(self) -> None:
        with self.broker._lock:
            if not self.closing:
                self.broker._abort(self, close_wire=False)

    def _name(self) -> str:
        return self.session.client_id if self.session else "<unconnected>"


class Broker:
    """The U-space message backbone."""

    def __init__(self, clock: Callable[[], int],
                 max_packet: int = DEFAULT_MAX_PACKET,
                 retry_interval_ms: int = RETRY_INTERVAL_MS,
                 max_retries: int = MAX_RETRIES):
        self.clock = clock
        self.max_packet = max_packet
        self.retry_interval_ms = retry_interval_ms
        self.max_retries = max_retries
        self._sessions: dict[str, _Session] = {}
        self._retained: dict[str, tuple[bytes, int]] = {}
        self._lock = threading.RLock()

    # -- connection plumbing ------------------------------------------------

    def accept(self, wire) -> None:
        """Adopt a freshly opened transport connection."""
        conn = _Conn(self, wire)
        wire.set_receiver(conn.feed)
        wire.set_on_close(conn.on_transport_close)

    def session_count(self) -> int:
        with self._lock:
            return len(self._sessions)

    def retained_topics(self) -> list[str]:
        with self._lock:
            return sorted(self._retained)

    # -- time ---------------------------------------------------------------

    def on_time(self, now_ms: int) -> None:
        """Retransmit overdue QoS traffic and enforce keepalives."""
        with self._lock:
            for session in list(self._sessions.values()):
                conn = session.conn
                if conn is None:
                    continue
                if conn.keepalive_ms and now_ms - conn.last_rx_ms > conn.keepalive_ms * 3 // 2:
                    log.info("keepalive expired for %s", session.client_id)
                    self._abort(conn)
                    continue
                for flight in list(session.inflight.values()):
                    if now_ms < flight.deadline_ms:
                        continue
                    if flight.retries >= self.max_retries:
                        log.warning("giving up on packet %d to %s",
                                    flight.packet_id, session.client_id)
                        self._abort(conn)
                        break
                    flight.retries += 1
                    flight.deadline_ms = now_ms + self.retry_interval_ms
                    if flight.awaiting == "pubcomp":
                        conn.send(PubRel(packet_id=flight.packet_id))
                    else:
                        conn.send(Publish(topic=flight.topic, payload=flight.payload,
                                          qos=flight.qos, retain=flight.retain,
                                          dup=True, packet_id=flight.packet_id))

    # -- packet handling ----------------------------------------------------

    def _handle(self, conn: _Conn, packet: Packet) -> None:
        if conn.session is None:
            if not isinstance(packet, Connect):
                raise ProtocolError(f"{type(packet).__name__} before CONNECT")
            self._on_connect(conn, packet)
            return
        if isinstance(packet, Connect):
            raise ProtocolError("second CONNECT on one connection")
        if isinstance(packet, Publish):
            self._on_publish(conn, packet)
        elif isinstance(packet, PubAck):
            self._on_puback(conn, packet.packet_id)
        elif isinstance(packet, PubRec):
            self._on_pubrec(conn, packet.packet_id)
        elif isinstance(packet, PubRel):
            self._on_pubrel(conn, packet.packet_id)
        elif isinstance(packet, PubComp):
            self._on_pubcomp(conn, packet.packet_id)
        elif isinstance(packet, Subscribe):
            self._on_subscribe(conn, packet)
        elif isinstance(packet, Unsubscribe):
            self._on_unsubscribe(conn, packet)
        elif isinstance(packet, PingReq):
            conn.send(PingResp())
        elif isinstance(packet, Disconnect):
            conn.will = None
            self._abort(conn, publish_will=False)
        else:
            raise ProtocolError(f"unexpected {type(packet).__name__} from a client")

    def _on_connect(self, conn: _Conn, packet: Connect) -> None:
        if not packet.client_id:
            conn.send(ConnAck(return_code=ConnectReturnCode.IDENTIFIER_REJECTED))
            self._abort(conn, publish_will=False)
            return
        existing = self._sessions.get(packet.client_id)
        if existing is not None and existing.conn is not None:
            log.info("session takeover for %s", packet.client_id)
            self._abort(existing.conn)
        session = _Session(packet.client_id)
        self._sessions[packet.client_id] = session
        session.conn = conn
        conn.session = session
        conn.will = packet.will
        conn.keepalive_ms = packet.keepalive * 1000
        conn.send(ConnAck(session_present=False,
                          return_code=ConnectReturnCode.ACCEPTED))

    def _on_publish(self, conn: _Conn, packet: Publish) -> None:
        if packet.retain:
            if packet.payload:
                self._retained[packet.topic] = (packet.payload, packet.qos)
            else:
                self._retained.pop(packet.topic, None)
        if packet.qos == 0:
            self._route(packet.topic, packet.payload, 0)
        elif packet.qos == 1:
            self._route(packet.topic, packet.payload, 1)
            conn.send(PubAck(packet_id=packet.packet_id))
        else:
            session = conn.session
            assert session is not None and packet.packet_id is not None
            if packet.packet_id not in session.incoming_qos2:
                session.incoming_qos2.add(packet.packet_id)
                self._route(packet.topic, packet.payload, 2)
            conn.send(PubRec(packet_id=packet.packet_id))

    def _on_puback(self, conn: _Conn, packet_id: int) -> None:
        session = conn.session
        assert session is not None
        flight = session.inflight.get(packet_id)
        if flight is not None and flight.awaiting == "puback":
            del session.inflight[packet_id]

    def _on_pubrec(self, conn: _Conn, packet_id: int) -> None:
        session = conn.session
        assert session is not None
        flight = session.inflight.get(packet_id)
        if flight is not None and flight.awaiting == "pubrec":
            flight.awaiting = "pubcomp"
            flight.retries = 0
            flight.deadline_ms = self.clock() + self.retry_interval_ms
        conn.send(PubRel(packet_id=packet_id))

    def _on_pubrel(self, conn: _Conn, packet_id: int) -> None:
        session = conn.session
        assert session is not None
        session.incoming_qos2.discard(packet_id)
        conn.send(PubComp(packet_id=packet_id))

    def _on_pubcomp(self, conn: _Conn, packet_id: int) -> None:
        session = conn.session
        assert session is not None
        flight = session.inflight.get(packet_id)
        if flight is not None and flight.awaiting == "pubcomp":
            del session.inflight[packet_id]

    def _on_subscribe(self, conn: _Conn, packet: Subscribe) -> None:
        session = conn.session
        assert session is not None
        codes = []
        for topic_filter, requested_qos in packet.filters:
            session.subscriptions[topic_filter] = requested_qos
            codes.append(requested_qos)
        conn.send(SubAck(packet_id=packet.packet_id, return_codes=tuple(codes)))
        # Retained replay happens after the SUBACK, one per matching topic.
        for topic_filter, granted in packet.filters:
            for topic in sorted(self._retained):
                if topic_matches(topic_filter, topic):
                    payload, retained_qos = self._retained[topic]
                    self._send_to(session, topic, payload,
                                  min(retained_qos, granted), retain=True)

    def _on_unsubscribe(self, conn: _Conn, packet: Unsubscribe) -> None:
        session = conn.session
        assert session is not None
        for topic_filter in packet.filters:
            session.subscriptions.pop(topic_filter, None)
        conn.send(UnsubAck(packet_id=packet.packet_id))

    # -- fan-out ------------------------------------------------------------

    def _route(self, topic: str, payload: bytes, publish_qos: int) -> None:
        for session in list(self._sessions.values()):
            if session.conn is None:
                continue
            granted = session.granted_qos_for(topic)
            if granted is None:
                continue
            self._send_to(session, topic, payload, min(publish_qos, granted),
                          retain=False)

    def _send_to(self, session: _Session, topic: str, payload: bytes,
                 qos: int, retain: bool) -> None:
        conn = session.conn
        if conn is None:
            return
        if qos == 0:
            conn.send(Publish(topic=topic, payload=payload, qos=0, retain=retain))
            return
        packet_id = session.alloc_packet_id()
        session.inflight[packet_id] = _OutFlight(
            packet_id=packet_id, topic=topic, payload=payload, qos=qos,
            retain=retain, awaiting="puback" if qos == 1 else "pubrec",
            deadline_ms=self.clock() + self.retry_interval_ms)
        conn.send(Publish(topic=topic, payload=payload, qos=qos, retain=retain,
                          packet_id=packet_id))

    # -- teardown -----------------------------------------------------------

    def _abort(self, conn: _Conn, publish_will: bool = True,
               close_wire: bool = True) -> None:
        if conn.closing:
            return
        conn.closing = True
        session = conn.session
        if session is not None and session.conn is conn:
            session.conn = None
            del self._sessions[session.client_id]
        will = conn.will
        conn.will = None
        if close_wire:
            conn.wire.close()
        if publish_will and will is not None:
            if will.retain:
                if will.payload:
                    self._retained[will.topic] = (will.payload, will.qos)
                else:
                    self._retained.pop(will.topic, None)
            self._route(will.topic, will.payload, will.qos)
