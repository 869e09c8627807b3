"""Wire-format interop over real TCP sockets.

One side of every exchange here is the hand-rolled probe from rawclient.py;
the other side is the package. Byte-for-byte expectations are computed
independently in the test.
"""
from __future__ import annotations

import time

import pytest

from uamsim.mqtt import Broker, MqttClient
from uamsim.mqtt.tcp import TcpBrokerServer, connect_tcp, wall_ms

from rawclient import (
    CONNACK_OK, RawMqttProbe, mqtt_string, varint,
)


@pytest.fixture
def tcp_broker():
    broker = Broker(clock=wall_ms)
    server = TcpBrokerServer(broker, port=0)
    server.start()
    yield broker, server
    server.stop()


def pump(wires, clients, condition, timeout_s=5.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        for wire in wires:
            wire.poll()
        for client in clients:
            client.on_time(wall_ms())
        if condition():
            return
        time.sleep(0.005)
    raise AssertionError("condition not reached over TCP")


def test_third_party_subscriber_receives_retained_notice_bit_exact(tcp_broker):
    broker, server = tcp_broker

    # package client publishes a retained pad-status notice
    wire = connect_tcp("127.0.0.1", server.port)
    publisher = MqttClient(wire, "vertidrome-manager", clock=wall_ms)
    publisher.connect()
    pump([wire], [publisher], lambda: publisher.connected)
    topic = "vertidrome/VD_BINNENALSTER/padstatus"
    payload = b'{"pad":"PAD1","status":"CLOSED","cause":"FOREIGN_OBJECT"}'
    publisher.publish(topic, payload, qos=1, retain=True)
    pump([wire], [publisher], lambda: publisher.inflight_count == 0)

    # independently written client subscribes afterwards
    probe = RawMqttProbe("127.0.0.1", server.port, client_id="third-party")
    try:
        connack = probe.connect()
        assert connack == CONNACK_OK
        suback = probe.subscribe("vertidrome/+/padstatus", qos=1, packet_id=1)
        assert suback == bytes([0x90, 0x03, 0x00, 0x01, 0x01])

        got = probe.receive_publish()
        # fresh session, so the broker's first allocated packet id is 1
        body = mqtt_string(topic) + bytes([0x00, 0x01]) + payload
        expected_frame = bytes([0x33]) + varint(len(body)) + body
        assert got["frame"] == expected_frame
        assert got["topic"] == topic
        assert got["payload"] == payload
        assert got["retain"] is True
        assert got["qos"] == 1
    finally:
        probe.disconnect()

    publisher.disconnect()


def test_third_party_publish_reaches_package_client(tcp_broker):
    broker, server = tcp_broker

    inbox = []
    wire = connect_tcp("127.0.0.1", server.port)
    subscriber = MqttClient(wire, "fleet", clock=wall_ms,
                            on_message=lambda *m: inbox.append(m))
    subscriber.connect()
    pump([wire], [subscriber], lambda: subscriber.connected)
    subscriber.subscribe([("uspace/emergency", 0)])
    pump([wire], [subscriber], lambda: "uspace/emergency" in subscriber.granted)

    probe = RawMqttProbe("127.0.0.1", server.port, client_id="sensor")
    try:
        assert probe.connect() == CONNACK_OK
        probe.publish_qos0("uspace/emergency", b'{"kind":"PersonOnPad"}')
        pump([wire], [subscriber], lambda: len(inbox) == 1)
    finally:
        probe.disconnect()

    topic, payload, qos, retain, dup = inbox[0]
    assert (topic, payload, qos) == ("uspace/emergency", b'{"kind":"PersonOnPad"}', 0)
    subscriber.disconnect()


def test_package_clients_round_trip_qos2_over_tcp(tcp_broker):
    broker, server = tcp_broker

    inbox = []
    sub_wire = connect_tcp("127.0.0.1", server.port)
    subscriber = MqttClient(sub_wire, "sub", clock=wall_ms,
                            on_message=lambda *m: inbox.append(m))
    subscriber.connect()
    pub_wire = connect_tcp("127.0.0.1", server.port)
    publisher = MqttClient(pub_wire, "pub", clock=wall_ms)
    publisher.connect()
    wires = [sub_wire, pub_wire]
    clients = [subscriber, publisher]
    pump(wires, clients, lambda: subscriber.connected and publisher.connected)

    subscriber.subscribe([("t/#", 2)])
    pump(wires, clients, lambda: "t/#" in subscriber.granted)
    for i in range(20):
        publisher.publish(f"t/{i}", str(i).encode(), qos=2)
    pump(wires, clients,
         lambda: len(inbox) == 20 and publisher.inflight_count == 0)

    assert sorted(m[1] for m in inbox) == sorted(str(i).encode() for i in range(20))
    assert all(m[2] == 2 for m in inbox)
    for client in clients:
        client.disconnect()
