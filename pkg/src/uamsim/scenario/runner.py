"""Scenario harness: builds the whole stack on one deterministic network,
drives the clock in fixed ticks, and keeps the evidence.

Each tick is a barrier. Scheduled scenario actions fire first (weather
steps, flight hand-ins), then every component gets its on_time call, then
the network drains until nothing is left to deliver at that instant. A run
is therefore a pure function of its configuration, which is what makes the
byte-equal log comparison in the test suite meaningful.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..fleet import FleetManager, PadSite, WorldMap
from ..messages import TelemetrySample, WeatherReport
from ..mqtt import Broker, MqttClient, Network, inproc_pair
from ..mqtt.tcp import TcpBrokerServer
from ..node import ServiceNode
from ..uspace import UspaceService
from ..vehicles import PROFILES, ScriptedDetection, Vehicle
from ..vertidrome import Pad, SectorVolume, VertidromeManager
from ..vertidrome.gateway import UiRecorder, VsoGateway
from .config import ConfigError, ScenarioConfig

NOMINAL_SEQUENCE = (
    "plan-filed",
    "uspace-submitted",
    "vertidrome-accepted",
    "takeoff",
    "tracking-active",
    "landed-within-slot",
    "plan-concluded",
)

REROUTING_SEQUENCE = (
    "plan-filed",
    "uspace-submitted",
    "vertidrome-accepted",
    "takeoff",
    "tracking-active",
    "person-detected",
    "pad-closed",
    "closure-received-by-fleet",
    "alternate-filed",
    "alternate-accepted",
    "alternate-approved",
    "landed-at-alternate",
    "plan-concluded",
)

TEMPLATES = {"nominal": NOMINAL_SEQUENCE, "rerouting": REROUTING_SEQUENCE}


class EventLog:
    """Append-only run journal; one JSON-friendly dict per event."""

    def __init__(self, clock: Callable[[], int]):
        self.clock = clock
        self.entries: list[dict] = []

    def append(self, source: str, kind: str, payload: dict) -> None:
        self.entries.append({"sim_time_ms": self.clock(), "source": source,
                             "kind": kind, "payload": payload})

    def bind(self, source: str) -> Callable[[str, dict], None]:
        def log(kind: str, payload: dict) -> None:
            self.append(source, kind, payload)
        return log

    def kinds(self) -> list[str]:
        return [e["kind"] for e in self.entries]

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.entries if e["kind"] == kind]

    def to_lines(self) -> list[str]:
        return [json.dumps(e, sort_keys=True) for e in self.entries]

    def dump(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")
        return path


def assert_sequence(log: EventLog | list[str],
                    expected: tuple[str, ...]) -> str | None:
    """None when the expected kinds appear in order (other events may sit in
    between); otherwise the first expected kind that never showed up."""
    kinds = log.kinds() if isinstance(log, EventLog) else list(log)
    position = 0
    for want in expected:
        while position < len(kinds) and kinds[position] != want:
            position += 1
        if position == len(kinds):
            return want
        position += 1
    return None


def audit_causality(log: EventLog) -> list[str]:
    """Cross-service sanity: effects must not precede their causes."""
    violations: list[str] = []
    submissions: dict[str, int] = {}
    detections: list[tuple[int, str, str | None]] = []
    for i, entry in enumerate(log.entries):
        kind, payload = entry["kind"], entry["payload"]
        if kind == "uspace-submitted":
            submissions.setdefault(payload["callsign"], i)
        elif kind in ("vertidrome-accepted", "vertidrome-rejected"):
            cause = submissions.get(payload["callsign"])
            if cause is None:
                violations.append(
                    f"{kind} for {payload['callsign']} without a submission")
        elif kind in ("person-detected", "hazard-detected"):
            detections.append((i, payload["vertidrome"], payload.get("pad")))
        elif kind == "pad-closed" and payload.get("cause") == "ForeignObject":
            seen = any(v == payload["vertidrome"]
                       and (p is None or p == payload["pad"])
                       for j, v, p in detections if j < i)
            if not seen:
                violations.append(
                    f"pad-closed at {payload['vertidrome']}/{payload['pad']} "
                    "without a prior detection")
    return violations


@dataclass
class RunResult:
    config: ScenarioConfig
    log: EventLog
    samples: list[TelemetrySample]
    expected: tuple[str, ...] | None
    failure: str | None
    sim_end_ms: int
    wall_s: float
    timed_out: bool = False

    @property
    def passed(self) -> bool:
        return self.failure is None and not self.timed_out


class ScenarioRunner:
    def __init__(self, config: ScenarioConfig, *, tcp: bool = False,
                 broker_port: int = 0, gateway_port: int | None = None,
                 auto_ack: bool = False, speedup: float | None = None,
                 on_tick: Callable[[int], None] | None = None,
                 on_ready: Callable[["ScenarioRunner"], None] | None = None):
        self.config = config
        self.speedup = speedup
        self.on_tick = on_tick
        self.on_ready = on_ready
        person_in_loop = config.person_in_loop and not auto_ack
        if config.expect is not None and config.expect not in TEMPLATES:
            raise ConfigError(f"unknown template {config.expect!r} "
                              f"(one of {sorted(TEMPLATES)})")
        self.expected = TEMPLATES.get(config.expect) if config.expect else None

        self.net = Network()
        self.clock = lambda: self.net.now_ms
        self.log = EventLog(self.clock)
        self.broker = Broker(clock=self.clock)
        self.clients: list[MqttClient] = []
        self.samples: list[TelemetrySample] = []

        # Service construction order fixes the broker's fan-out order and is
        # part of the deterministic contract: U-space first, then the ground
        # sites, then the operator, then the aircraft.
        self.uspace = UspaceService(publish=None, clock=self.clock,
                                    log_event=self.log.bind("uspace"))
        node = self._node("uspace")
        self.uspace.publish = node.publish
        node.attach(self.uspace)

        sector = SectorVolume(radius_m=config.sector.radius_m,
                              ceiling_m=config.sector.ceiling_m)
        self.managers: dict[str, VertidromeManager] = {}
        for vd in config.vertidromes:
            manager = VertidromeManager(
                vd.vertidrome_id,
                [Pad(p.pad_id, p.center, p.elevation_m) for p in vd.pads],
                publish=None, clock=self.clock,
                log_event=self.log.bind(vd.vertidrome_id),
                person_in_loop=person_in_loop, sector=sector)
            node = self._node(vd.vertidrome_id)
            manager.publish = node.publish
            node.attach(manager)
            self.managers[vd.vertidrome_id] = manager

        self.world = _build_world(config)
        self.fleet = FleetManager(
            config.operator, self.world, publish=None, clock=self.clock,
            log_event=self.log.bind("fleet"), cruise_ms=config.cruise_ms,
            cruise_alt_m=config.cruise_alt_m)
        node = self._node("fleet")
        self.fleet.publish = node.publish
        node.attach(self.fleet)

        self.vehicles: dict[str, Vehicle] = {}
        for vc in config.vehicles:
            vehicle = Vehicle(
                vc.callsign, PROFILES[vc.profile], vc.start,
                publish=None, clock=self.clock,
                log_event=self.log.bind(vc.callsign),
                weather_vertidrome=vc.watches,
                script=[ScriptedDetection(d.at_ms, d.kind, d.vertidrome,
                                          d.pad, d.detail)
                        for d in vc.detections])
            node = self._node(vc.callsign)
            vehicle.publish = node.publish
            node.attach(vehicle)
            self.vehicles[vc.callsign] = vehicle

        self._env = self._node("environment")
        monitor = self._node("monitor")
        monitor.route("uspace/telemetry/+", self._on_sample, qos=0)

        self._timeline = self._build_timeline()
        self._flights_pending = len(config.flights)

        self.tcp_server: TcpBrokerServer | None = None
        if tcp:
            self.tcp_server = TcpBrokerServer(self.broker, port=broker_port,
                                              external_drive=True)
        self.gateways: list[VsoGateway] = []
        self.recorders: dict[str, UiRecorder] = {}
        if person_in_loop or gateway_port is not None:
            console_vd = config.console_vertidrome \
                or config.vertidromes[0].vertidrome_id
            self.gateways.append(VsoGateway(self.managers[console_vd],
                                            port=gateway_port or 8080))

    # -- wiring ---------------------------------------------------------------

    def _node(self, name: str) -> ServiceNode:
        client_end, broker_end = inproc_pair(self.net)
        self.broker.accept(broker_end)
        client = MqttClient(client_end, name, clock=self.clock)
        client.connect()
        self.clients.append(client)
        return ServiceNode(name, client, self.clock)

    def _on_sample(self, envelope) -> None:
        if isinstance(envelope.body, TelemetrySample):
            self.samples.append(envelope.body)

    def attach_recorder(self, vertidrome: str) -> UiRecorder:
        recorder = UiRecorder(self.managers[vertidrome], self.clock)
        self.recorders[vertidrome] = recorder
        return recorder

    def _build_timeline(self) -> list[tuple[int, int, Callable[[], None]]]:
        """(due_ms, order, action); weather beats flight hand-ins at a tie."""
        timeline: list[tuple[int, int, Callable[[], None]]] = []
        for entry in self.config.weather:
            def blow(entry=entry) -> None:
                self._env.publish(WeatherReport(
                    vertidrome=entry.vertidrome,
                    wind_speed_ms=entry.speed_ms,
                    wind_direction_deg=entry.direction_deg,
                    timestamp_ms=self.clock()))
            timeline.append((entry.at_ms, 0, blow))
        starts = {v.callsign: v.start for v in self.config.vehicles}
        for flight in self.config.flights:
            # Flights are handed to the fleet up front; depart_ms only sets
            # the planned take-off, so authorisation happens ahead of time.
            def hand_in(flight=flight) -> None:
                self.fleet.add_flight(
                    flight.callsign, starts[flight.callsign],
                    flight.destination, requested_pad=flight.pad,
                    alternates=flight.alternates,
                    origin_name=flight.origin_name,
                    aircraft_type=self._profile_of(flight.callsign),
                    depart_ms=flight.depart_ms, priority=flight.priority)
                self._flights_pending -= 1
            timeline.append((0, 1, hand_in))
        timeline.sort(key=lambda item: item[:2])
        return timeline

    def _profile_of(self, callsign: str) -> str:
        for v in self.config.vehicles:
            if v.callsign == callsign:
                return v.profile
        return ""

    # -- the clock loop ---------------------------------------------------------

    def run(self) -> RunResult:
        config = self.config
        started = time.monotonic()
        if self.tcp_server is not None:
            self.tcp_server.start()
        for gateway in self.gateways:
            gateway.start()
        if self.on_ready is not None:
            self.on_ready(self)
        self.log.append("runner", "run-started",
                        {"scenario": config.name, "seed": config.seed,
                         "tick_ms": config.tick_ms})
        deadline_ms = round(config.timeout_s * 1000)
        timed_out = True
        try:
            now = 0
            while now < deadline_ms:
                now += config.tick_ms
                self.net.advance_to(now)
                while self._timeline and self._timeline[0][0] <= now:
                    _, _, action = self._timeline.pop(0)
                    action()
                self.broker.on_time(now)
                for client in self.clients:
                    client.on_time(now)
                self.fleet.on_time(now)
                for manager in self.managers.values():
                    manager.on_time(now)
                for vehicle in self.vehicles.values():
                    vehicle.on_time(now)
                self.net.run_until_idle(now)
                for gateway in self.gateways:
                    if gateway.drain_commands():
                        self.net.run_until_idle(now)
                if self.tcp_server is not None:
                    self.tcp_server.pump()
                    self.net.run_until_idle(now)
                if self.on_tick is not None:
                    self.on_tick(now)
                    self.net.run_until_idle(now)
                if self.speedup:
                    time.sleep(config.tick_ms / 1000.0 / self.speedup)
                if self._flights_pending == 0 and not self._timeline \
                        and self.fleet.all_terminal():
                    timed_out = False
                    break
        finally:
            for gateway in self.gateways:
                gateway.stop()
            if self.tcp_server is not None:
                self.tcp_server.stop()
        self.log.append("runner", "run-finished", {
            "sim_time_ms": self.net.now_ms,
            "flights": {cs: f.state.value
                        for cs, f in self.fleet.flights.items()}})
        failure = None
        if self.expected is not None:
            failure = assert_sequence(self.log, self.expected)
        return RunResult(config=config, log=self.log, samples=self.samples,
                         expected=self.expected, failure=failure,
                         sim_end_ms=self.net.now_ms,
                         wall_s=time.monotonic() - started,
                         timed_out=timed_out)


def _build_world(config: ScenarioConfig) -> WorldMap:
    sites = [PadSite(vd.vertidrome_id, p.pad_id, p.center, p.elevation_m,
                     p.approach_deg, p.approach_radius_m)
             for vd in config.vertidromes for p in vd.pads]
    return WorldMap([g.corners for g in config.geofences], sites)


def run_scenario(config: ScenarioConfig, **kwargs) -> RunResult:
    return ScenarioRunner(config, **kwargs).run()
