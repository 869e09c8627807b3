import json
import time

import pytest
from websockets.sync.client import connect

from uamsim import messages as m
from uamsim.vertidrome.gateway import UiRecorder, VsoGateway
from uamsim.vertidrome.manager import Pad, VertidromeManager
from uamsim.vertidrome.vso_stub import VsoStub
from test_manager import VD, VdHarness, make_plan


@pytest.fixture()
def gw():
    h = VdHarness()
    gateway = VsoGateway(h.mgr, port=0)
    gateway.start()
    yield h, gateway
    gateway.stop()


def pump(h, gateway, until, timeout_s=3.0):
    """Play the manager's event loop until a condition holds."""
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        gateway.drain_commands()
        if until():
            return
        time.sleep(0.01)
    raise AssertionError("condition not reached")


def recv_event(ws, wanted, timeout_s=3.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        event = json.loads(ws.recv(timeout=timeout_s))
        if event.get("event") == wanted:
            return event
    raise AssertionError(f"no {wanted!r} event")


def test_connect_receives_a_full_snapshot(gw):
    h, gateway = gw
    with connect(f"ws://127.0.0.1:{gateway.port}") as ws:
        snapshot = json.loads(ws.recv(timeout=3))
    assert snapshot["event"] == "snapshot"
    assert snapshot["vertidrome"] == VD
    assert [row["pad"] for row in snapshot["pads"]] == ["PAD_A", "PAD_B"]
    assert all(row["status"] == "CLEAR" for row in snapshot["pads"])
    assert len(snapshot["forecast"]["rows"]) == 11


def test_state_changes_are_broadcast(gw):
    h, gateway = gw
    with connect(f"ws://127.0.0.1:{gateway.port}") as ws:
        ws.recv(timeout=3)   # snapshot
        h.set_wind(3.0, direction=60.0)
        event = recv_event(ws, "weather")
    assert event == {"event": "weather", "direction_deg": 60.0,
                     "speed_ms": 3.0}


def test_command_round_trip_closes_a_pad(gw):
    h, gateway = gw
    with connect(f"ws://127.0.0.1:{gateway.port}") as ws:
        ws.recv(timeout=3)
        ws.send(json.dumps({"command": "CreateCloseOrder", "pad": "PAD_A",
                            "start_ms": 0, "duration_ms": 0}))
        pump(h, gateway, lambda: h.pad_notices())
        # state broadcasts go out while the command runs, before its result
        seen = {}
        while "command-result" not in seen:
            event = json.loads(ws.recv(timeout=3))
            seen[event["event"]] = event
    result = seen["command-result"]
    assert result["ok"] and result["command"] == "CreateCloseOrder"
    row = next(r for r in seen["pads"]["rows"] if r["pad"] == "PAD_A")
    assert row["status"] == "CLOSED" and row["mode"] == "NONE"
    assert h.pad_notices()[-1].status == m.PadStatus.CLOSED


def test_garbage_frame_gets_an_error_result(gw):
    h, gateway = gw
    with connect(f"ws://127.0.0.1:{gateway.port}") as ws:
        ws.recv(timeout=3)
        ws.send("this is not json")
        result = recv_event(ws, "command-result")
    assert not result["ok"]
    assert "JSON" in result["reason"]


def test_scripted_operator_approves_a_pending_flight():
    h = VdHarness(person_in_loop=True)
    gateway = VsoGateway(h.mgr, port=0)
    gateway.start()
    stub = VsoStub(f"ws://127.0.0.1:{gateway.port}")
    stub.start()
    try:
        h.request(make_plan())
        assert h.decisions() == []
        pump(h, gateway, lambda: h.decisions())
        assert h.last_decision().decision == m.Decision.ACCEPTED
        # the stub also acknowledges every pop-up it sees
        pump(h, gateway, lambda: not h.mgr.popups)
    finally:
        stub.stop()
        gateway.stop()


def test_recorder_captures_the_stream_as_json_lines(tmp_path):
    h = VdHarness()
    recorder = UiRecorder(h.mgr, clock=lambda: h.now_ms)
    h.set_wind(3.0)
    h.request(make_plan())
    out = tmp_path / "ui.jsonl"
    recorder.dump(out)
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert lines[0]["event"] == "snapshot"
    assert any(line["event"] == "weather" for line in lines)
    assert any(line["event"] == "forecast" for line in lines)
    assert all("sim_time_ms" in line for line in lines)
