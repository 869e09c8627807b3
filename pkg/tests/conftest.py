from __future__ import annotations

import sys
from pathlib import Path

import pytest

# Let tests import the oracle helpers living next to them.
sys.path.insert(0, str(Path(__file__).parent))

from uamsim.mqtt import Broker, MqttClient, Network, inproc_pair


class Collector:
    """Records everything a client delivers."""

    def __init__(self):
        self.messages: list[tuple[str, bytes, int, bool, bool]] = []

    def __call__(self, topic, payload, qos, retain, dup):
        self.messages.append((topic, payload, qos, retain, dup))

    def topics(self):
        return [m[0] for m in self.messages]

    def payloads(self):
        return [m[1] for m in self.messages]


class Bus:
    """A broker on a deterministic in-process network, plus client plumbing."""

    def __init__(self):
        self.net = Network()
        self.broker = Broker(clock=lambda: self.net.now_ms)
        self.clients: list[MqttClient] = []

    def client(self, client_id: str, **kwargs) -> tuple[MqttClient, Collector]:
        collector = Collector()
        client_end, broker_end = inproc_pair(self.net)
        self.broker.accept(broker_end)
        client = MqttClient(client_end, client_id, clock=lambda: self.net.now_ms,
                            on_message=collector, **kwargs)
        client.connect()
        self.clients.append(client)
        return client, collector

    def drain(self):
        self.net.run_until_idle()

    def run(self, seconds: float, step_ms: int = 1_000):
        """Advance simulated time, firing retry timers along the way."""
        end = self.net.now_ms + int(seconds * 1000)
        while self.net.now_ms < end:
            target = min(self.net.now_ms + step_ms, end)
            self.net.advance_to(target)
            self.broker.on_time(self.net.now_ms)
            for client in self.clients:
                client.on_time(self.net.now_ms)
            self.net.run_until_idle(self.net.now_ms)


@pytest.fixture
def bus():
    return Bus()
