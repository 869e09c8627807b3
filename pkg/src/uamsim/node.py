"""Glue between an MQTT client and a typed service.

A ServiceNode owns one client, stamps outgoing envelopes, parses incoming
payloads and fans them out to registered handlers by topic filter. Service
logic stays transport-free: it consumes Envelopes and calls publish().
"""
from __future__ import annotations

import logging
from typing import Callable

from .messages import Body, Envelope, MessageError, Outbox, delivery_for, parse, serialize
from .mqtt import MqttClient
from .mqtt.topics import topic_matches

log = logging.getLogger(__name__)


class ServiceNode:
    def __init__(self, name: str, client: MqttClient, clock: Callable[[], int]):
        self.name = name
        self.client = client
        self.clock = clock
        self.outbox = Outbox(name, clock)
        self.parse_errors = 0
        self._routes: list[tuple[str, Callable[[Envelope], None]]] = []
        client.on_message = self._on_raw

    def publish(self, body: Body) -> None:
        envelope = self.outbox.make(body)
        qos, retain = delivery_for(body)
        self.client.publish(envelope.topic, serialize(envelope), qos=qos,
                            retain=retain)

    def route(self, topic_filter: str, handler: Callable[[Envelope], None],
              qos: int = 1) -> None:
        self._routes.append((topic_filter, handler))
        self.client.subscribe([(topic_filter, qos)])

    def attach(self, service) -> None:
        """Wire a service exposing topics() and handle(envelope)."""
        for topic_filter, qos in service.topics():
            self.route(topic_filter, service.handle, qos)

    def _on_raw(self, topic: str, payload: bytes, qos: int, retain: bool,
                dup: bool) -> None:
        try:
            envelope = parse(payload)
        except MessageError as exc:
            self.parse_errors += 1
            log.warning("%s: dropping unparseable payload on %s: %s",
                        self.name, topic, exc)
            return
        for topic_filter, handler in self._routes:
            if topic_matches(topic_filter, topic):
                handler(envelope)
