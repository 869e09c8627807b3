from __future__ import annotations

from uamsim.mqtt import Will
from uamsim.mqtt.packets import encode_packet, Subscribe


def test_connect_establishes_session(bus):
    client, _ = bus.client("alpha")
    bus.drain()
    assert client.connected
    assert bus.broker.session_count() == 1


def test_publish_reaches_subscriber(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("uspace/position/+", 0)])
    bus.drain()
    pub.publish("uspace/position/UAV1", b'{"e":1}')
    bus.drain()
    assert inbox.messages == [("uspace/position/UAV1", b'{"e":1}', 0, False, False)]


def test_no_delivery_without_matching_subscription(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("uspace/adherence/+", 0)])
    bus.drain()
    pub.publish("uspace/position/UAV1", b"x")
    bus.drain()
    assert inbox.messages == []


def test_overlapping_subscriptions_deliver_once_at_best_qos(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("vertidrome/#", 0), ("vertidrome/+/padstatus", 1)])
    bus.drain()
    pub.publish("vertidrome/VD1/padstatus", b"closed", qos=1)
    bus.drain()
    assert len(inbox.messages) == 1
    assert inbox.messages[0][2] == 1  # delivered at the better granted qos


def test_qos_is_capped_by_grant(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("t", 0)])
    bus.drain()
    pub.publish("t", b"m", qos=2)
    bus.drain()
    assert inbox.messages[0][2] == 0


def test_qos1_handshake_completes(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("t", 1)])
    bus.drain()
    pub.publish("t", b"m", qos=1)
    bus.drain()
    assert inbox.messages[0][:3] == ("t", b"m", 1)
    assert pub.inflight_count == 0
    for session in bus.broker._sessions.values():
        assert not session.inflight


def test_qos2_handshake_completes(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("t", 2)])
    bus.drain()
    pub.publish("t", b"m", qos=2)
    bus.drain()
    assert inbox.messages == [("t", b"m", 2, False, False)]
    assert pub.inflight_count == 0


def test_retained_message_replayed_to_late_subscriber(bus):
    pub, _ = bus.client("pub")
    bus.drain()
    pub.publish("vertidrome/VD1/padstatus", b"PAD1 closed", qos=1, retain=True)
    bus.drain()
    late, inbox = bus.client("late")
    bus.drain()
    late.subscribe([("vertidrome/+/padstatus", 1)])
    bus.drain()
    assert len(inbox.messages) == 1
    topic, payload, qos, retain, dup = inbox.messages[0]
    assert (topic, payload, retain) == ("vertidrome/VD1/padstatus", b"PAD1 closed", True)
    assert qos == 1


def test_live_delivery_does_not_set_retain_flag(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("t", 0)])
    bus.drain()
    pub.publish("t", b"m", retain=True)
    bus.drain()
    assert inbox.messages[0][3] is False
    assert bus.broker.retained_topics() == ["t"]


def test_empty_retained_payload_clears_slot(bus):
    pub, _ = bus.client("pub")
    bus.drain()
    pub.publish("t", b"v", retain=True)
    bus.drain()
    pub.publish("t", b"", retain=True)
    bus.drain()
    assert bus.broker.retained_topics() == []
    late, inbox = bus.client("late")
    bus.drain()
    late.subscribe([("t", 0)])
    bus.drain()
    assert inbox.messages == []


def test_will_published_on_abnormal_disconnect(bus):
    watcher, inbox = bus.client("watcher")
    bus.drain()
    watcher.subscribe([("status/+", 0)])
    bus.drain()
    doomed, _ = bus.client("doomed", will=Will(topic="status/doomed",
                                               payload=b"offline"))
    bus.drain()
    doomed.wire.close()  # transport drops without DISCONNECT
    bus.drain()
    assert inbox.messages == [("status/doomed", b"offline", 0, False, False)]


def test_no_will_on_clean_disconnect(bus):
    watcher, inbox = bus.client("watcher")
    bus.drain()
    watcher.subscribe([("status/+", 0)])
    bus.drain()
    polite, _ = bus.client("polite", will=Will(topic="status/polite",
                                               payload=b"offline"))
    bus.drain()
    polite.disconnect()
    bus.drain()
    assert inbox.messages == []


def test_duplicate_client_id_takes_over(bus):
    watcher, inbox = bus.client("watcher")
    bus.drain()
    watcher.subscribe([("status/+", 0)])
    bus.drain()
    first, _ = bus.client("dup", will=Will(topic="status/dup", payload=b"gone"))
    bus.drain()
    second, _ = bus.client("dup")
    bus.drain()
    assert first.closed
    assert second.connected
    assert bus.broker.session_count() == 2  # watcher + the new "dup"
    # the displaced session went down abnormally, so its will fired
    assert inbox.messages == [("status/dup", b"gone", 0, False, False)]


def test_unsubscribe_stops_delivery(bus):
    pub, _ = bus.client("pub")
    sub, inbox = bus.client("sub")
    bus.drain()
    sub.subscribe([("t", 0)])
    bus.drain()
    pub.publish("t", b"one")
    bus.drain()
    sub.unsubscribe(["t"])
    bus.drain()
    pub.publish("t", b"two")
    bus.drain()
    assert inbox.payloads() == [b"one"]


def test_publish_before_connect_drops_connection(bus):
    from uamsim.mqtt import inproc_pair
    from uamsim.mqtt.packets import Publish

    rogue_end, broker_end = inproc_pair(bus.net)
    bus.broker.accept(broker_end)
    rogue_end.send(encode_packet(Publish(topic="t", payload=b"x")))
    bus.drain()
    assert rogue_end.closed


def test_malformed_bytes_drop_connection(bus):
    client, _ = bus.client("fuzzy")
    bus.drain()
    assert client.connected
    client.wire.send(bytes([0xF0, 0x00]))  # reserved packet type
    bus.drain()
    assert bus.broker.session_count() == 0


def test_invalid_subscribe_filter_rejected_at_decode(bus):
    client, _ = bus.client("strict")
    bus.drain()
    # hand-build a SUBSCRIBE for "a/#/b" which the codec must refuse to emit
    body = bytes([0x00, 0x01, 0x00, 0x05]) + b"a/#/b" + bytes([0x00])
    client.wire.send(bytes([0x82, len(body)]) + body)
    bus.drain()
    assert bus.broker.session_count() == 0


def test_keepalive_timeout_fires_will(bus):
    watcher, inbox = bus.client("watcher")
    bus.drain()
    watcher.subscribe([("status/+", 0)])
    bus.drain()
    lazy, _ = bus.client("lazy", keepalive=2,
                         will=Will(topic="status/lazy", payload=b"dead"))
    bus.drain()
    bus.run(10)
    assert inbox.messages == [("status/lazy", b"dead", 0, False, False)]
    assert lazy.closed


def test_pingreq_keeps_session_alive(bus):
    client, _ = bus.client("pinger", keepalive=2)
    bus.drain()
    for _ in range(6):
        client.ping()
        bus.run(1)
    assert client.connected
    assert bus.broker.session_count() == 1


def test_second_connect_on_same_wire_rejected(bus):
    client, _ = bus.client("twice")
    bus.drain()
    from uamsim.mqtt.packets import Connect
    client.wire.send(encode_packet(Connect(client_id="twice")))
    bus.drain()
    assert bus.broker.session_count() == 0
