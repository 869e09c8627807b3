"""Kinematic vehicles: waypoint followers with a command interface.

A vehicle owns nothing but its own state. It follows the uploaded route at
the profile's cruise speed, publishes telemetry at the profile's report
rate, refuses to take off into wind above the profile limit, and can carry
a scripted sensor payload that raises emergency reports at set times. Wind
gates go/no-go decisions only; it never pushes the vehicle around.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .messages import (
    Body, CommandKind, EmergencyKind, EmergencyReport, Envelope, FlightPlan,
    MessageError, TelemetrySample, VehicleCommand, VehicleMode,
    VehicleStatus, Waypoint, WeatherReport,
)

CAPTURE_RADIUS_M = 1.0
DEFAULT_REPORT_RATE_HZ = 2.0

AIRBORNE = (VehicleMode.TAKING_OFF, VehicleMode.ENROUTE, VehicleMode.APPROACH,
            VehicleMode.LANDING, VehicleMode.HOLDING)


@dataclass(frozen=True)
class VehicleProfile:
    name: str
    empty_weight_kg: float
    max_wind_ms: float
    endurance_min: float
    cruise_ms: float = 2.0
    climb_ms: float = 2.0
    max_speed_ms: float = 5.0
    report_rate_hz: float = DEFAULT_REPORT_RATE_HZ

    def __post_init__(self):
        values = (self.empty_weight_kg, self.max_wind_ms, self.endurance_min,
                  self.cruise_ms, self.climb_ms, self.max_speed_ms,
                  self.report_rate_hz)
        if any(v <= 0 for v in values):
            raise MessageError("profile values must be positive")
        if self.cruise_ms > self.max_speed_ms:
            raise MessageError("cruise speed exceeds the profile maximum")


PROFILES = {
    "EVO_X8_HEAVY": VehicleProfile("EVO X8 heavy", empty_weight_kg=9.95,
                                   max_wind_ms=11.0, endurance_min=30.0),
    "EVO_X8": VehicleProfile("EVO X8", empty_weight_kg=7.95,
                             max_wind_ms=11.0, endurance_min=20.0),
    "HOLYBRO_S500": VehicleProfile("HolyBro S500 V2", empty_weight_kg=1.3,
                                   max_wind_ms=10.0, endurance_min=15.0),
}


@dataclass(frozen=True)
class ScriptedDetection:
    """A sensor event the vehicle raises at a fixed simulated time."""
    at_ms: int
    kind: EmergencyKind
    vertidrome: str
    pad: str | None = None
    detail: str = ""


def _segment_modes(waypoints: Sequence[Waypoint]) -> list[VehicleMode]:
    """Flight phase per route segment, judged from the geometry."""
    modes: list[VehicleMode] = []
    last = len(waypoints) - 2
    for i in range(len(waypoints) - 1):
        a, b = waypoints[i], waypoints[i + 1]
        dxy = math.hypot(b.east_m - a.east_m, b.north_m - a.north_m)
        dz = b.up_m - a.up_m
        if i == 0 and dz > abs(dxy):
            modes.append(VehicleMode.TAKING_OFF)
        elif i == last and dz < -abs(dxy):
            modes.append(VehicleMode.LANDING)
        elif i == last - 1 or i == last:
            modes.append(VehicleMode.APPROACH)
        else:
            modes.append(VehicleMode.ENROUTE)
    return modes


class Vehicle:
    """One aircraft; stepped by the scenario clock, driven by commands."""

    def __init__(self, callsign: str, profile: VehicleProfile,
                 position: tuple[float, float, float],
                 publish: Callable[[Body], None], clock: Callable[[], int],
                 log_event: Callable[[str, dict], None] | None = None, *,
                 weather_vertidrome: str | None = None,
                 capture_m: float = CAPTURE_RADIUS_M,
                 script: Sequence[ScriptedDetection] = ()):
        self.callsign = callsign
        self.profile = profile
        self.position = (float(position[0]), float(position[1]),
                         float(position[2]))
        self.publish = publish
        self.clock = clock
        self.log_event = log_event or (lambda kind, payload: None)
        self.weather_vertidrome = weather_vertidrome
        self.capture_m = capture_m
        self.mode = VehicleMode.PARKED
        self.wind_ms = 0.0
        self.leg = "initial"
        self.elapsed_flight_ms = 0
        self.reports_sent = 0
        self._route: tuple[Waypoint, ...] = ()
        self._segment_modes: list[VehicleMode] = []
        self._next_wp = 0
        self._uploads = 0
        self._speed_now = 0.0
        self._last_step_ms: int | None = None
        self._next_report_ms: int | None = None
        self._script = sorted(script, key=lambda s: s.at_ms)
        self._distress_sent = False
        self._landed_status_due = False

    # -- wiring -----------------------------------------------------------

    def topics(self) -> list[tuple[str, int]]:
        subs = [(f"fleet/{self.callsign}/command", 1)]
        if self.weather_vertidrome:
            subs.append((f"vertidrome/{self.weather_vertidrome}/weather", 1))
        return subs

    def handle(self, envelope: Envelope) -> None:
        body = envelope.body
        if isinstance(body, VehicleCommand) and body.callsign == self.callsign:
            self.handle_command(body)
        elif isinstance(body, WeatherReport):
            self.wind_ms = body.wind_speed_ms

    # -- commands -----------------------------------------------------------

    def handle_command(self, cmd: VehicleCommand) -> bool:
        if cmd.command == CommandKind.TAKE_OFF:
            return self._take_off(cmd.plan)
        if cmd.command == CommandKind.UPLOAD_ROUTE:
            return self._upload_route(cmd.command, cmd.plan,
                                      allowed=(VehicleMode.ENROUTE,
                                               VehicleMode.HOLDING))
        if cmd.command == CommandKind.LAND:
            return self._upload_route(cmd.command, cmd.plan,
                                      allowed=(VehicleMode.ENROUTE,
                                               VehicleMode.APPROACH,
                                               VehicleMode.HOLDING))
        if cmd.command == CommandKind.HOLD:
            if self.mode in (VehicleMode.ENROUTE, VehicleMode.APPROACH,
                             VehicleMode.HOLDING):
                self._set_mode(VehicleMode.HOLDING, event="holding")
                return True
        return self._reject(cmd.command)

    def _reject(self, kind: CommandKind) -> bool:
        self.log_event("command-rejected", {
            "callsign": self.callsign, "command": kind.value,
            "mode": self.mode.value})
        return False

    def _take_off(self, plan: FlightPlan | None) -> bool:
        if self.mode != VehicleMode.PARKED or plan is None:
            return self._reject(CommandKind.TAKE_OFF)
        if self.wind_ms > self.profile.max_wind_ms:
            detail = (f"wind {self.wind_ms:.1f} m/s over the "
                      f"{self.profile.max_wind_ms:.1f} m/s limit")
            self.log_event("takeoff-refused", {
                "callsign": self.callsign, "wind_ms": self.wind_ms,
                "limit_ms": self.profile.max_wind_ms})
            self._publish_status(event="takeoff-refused", detail=detail)
            return False
        self._install_route(plan.waypoints)
        self.log_event("takeoff", {"callsign": self.callsign,
                                   "wind_ms": self.wind_ms})
        self._set_mode(self._current_segment_mode(), event="takeoff")
        now = self.clock()
        self._next_report_ms = now
        return True

    def _upload_route(self, kind: CommandKind, plan: FlightPlan | None,
                      allowed: tuple[VehicleMode, ...]) -> bool:
        if self.mode not in allowed or plan is None:
            return self._reject(kind)
        self._install_route(plan.waypoints)
        self._uploads += 1
        self.leg = "rerouted"
        self._set_mode(self._current_segment_mode(), event="route-uploaded")
        return True

    def _install_route(self, waypoints: tuple[Waypoint, ...]) -> None:
        self._route = waypoints
        self._segment_modes = _segment_modes(waypoints)
        self._next_wp = 0
        self._capture_reached()

    # -- kinematics -----------------------------------------------------------

    def _capture_reached(self) -> None:
        while (self._next_wp < len(self._route)
               and math.dist(self.position,
                             self._waypoint_xyz(self._next_wp))
               <= self.capture_m):
            self._next_wp += 1

    def _waypoint_xyz(self, i: int) -> tuple[float, float, float]:
        w = self._route[i]
        return (w.east_m, w.north_m, w.up_m)

    def _current_segment_mode(self) -> VehicleMode:
        if not self._segment_modes:
            return self.mode
        i = min(max(self._next_wp - 1, 0), len(self._segment_modes) - 1)
        return self._segment_modes[i]

    def _set_mode(self, mode: VehicleMode, event: str = "",
                  detail: str = "") -> None:
        changed = mode != self.mode
        self.mode = mode
        if changed or event:
            self._publish_status(event=event, detail=detail)

    def _publish_status(self, event: str = "", detail: str = "") -> None:
        self.publish(VehicleStatus(
            callsign=self.callsign, mode=self.mode, east_m=self.position[0],
            north_m=self.position[1], up_m=self.position[2],
            timestamp_ms=self.clock(), event=event, detail=detail))

    def on_time(self, now_ms: int) -> None:
        """Advance to the given instant; emit telemetry and script events."""
        if self._last_step_ms is None:
            self._last_step_ms = now_ms
        dt_ms = now_ms - self._last_step_ms
        self._last_step_ms = now_ms
        if self._landed_status_due:
            self._landed_status_due = False
            self._publish_status(event="landed")
        self._fire_script(now_ms)
        if dt_ms <= 0:
            return
        if self.mode in AIRBORNE:
            self.elapsed_flight_ms += dt_ms
            self._check_endurance(now_ms)
        if self.mode in AIRBORNE and self.mode != VehicleMode.HOLDING:
            self._advance(dt_ms / 1000.0, now_ms)
        self._emit_reports(now_ms)

    def _advance(self, dt_s: float, now_ms: int) -> None:
        budget = self.profile.cruise_ms * dt_s
        while budget > 1e-12 and self._next_wp < len(self._route):
            target = self._waypoint_xyz(self._next_wp)
            d = math.dist(self.position, target)
            if d <= budget:
                self.position = target
                budget -= d
                self._next_wp += 1
                self._capture_reached()
                if self._next_wp < len(self._route):
                    self._set_mode(self._current_segment_mode())
            else:
                f = budget / d
                self.position = tuple(
                    p + f * (t - p) for p, t in zip(self.position, target))
                budget = 0.0
        self._speed_now = self.profile.cruise_ms
        if self._next_wp >= len(self._route) and self._route:
            self.position = self._waypoint_xyz(len(self._route) - 1)
            self._speed_now = 0.0
            self._emit_sample(now_ms)
            # The status frame goes out on the next tick, once shutdown
            # settles, so the touchdown sample above is already through the
            # surveillance relay before anyone hears LANDED.
            self.mode = VehicleMode.LANDED
            self._landed_status_due = True
            self.log_event("landed", {"callsign": self.callsign,
                                      "leg": self.leg})
            self._route = ()
            self._next_report_ms = None

    def _check_endurance(self, now_ms: int) -> None:
        if self._distress_sent:
            return
        if self.elapsed_flight_ms > self.profile.endurance_min * 60_000:
            self._distress_sent = True
            self.log_event("endurance-exceeded", {"callsign": self.callsign})
            self.publish(EmergencyReport(
                kind=EmergencyKind.VEHICLE_DISTRESS, reporter=self.callsign,
                callsign=self.callsign, detail="endurance exceeded"))
            # land where it stands; the ground side must make room
            descent = (Waypoint(self.position[0], self.position[1],
                                self.position[2], now_ms),
                       Waypoint(self.position[0], self.position[1], 0.0,
                                now_ms + round(1000 * self.position[2]
                                               / self.profile.cruise_ms)))
            self._install_route(descent)
            self._set_mode(VehicleMode.LANDING, event="distress-descent")

    # -- telemetry and the sensor script ----------------------------------------

    def _emit_reports(self, now_ms: int) -> None:
        if self._next_report_ms is None or self.mode not in AIRBORNE:
            return
        interval = round(1000.0 / self.profile.report_rate_hz)
        while self._next_report_ms <= now_ms:
            self._emit_sample(self._next_report_ms)
            self._next_report_ms += interval

    def _emit_sample(self, timestamp_ms: int) -> None:
        self.reports_sent += 1
        self.publish(TelemetrySample(
            callsign=self.callsign, east_m=self.position[0],
            north_m=self.position[1], up_m=self.position[2],
            ground_speed_ms=self._speed_now, timestamp_ms=timestamp_ms,
            leg=self.leg))

    def _fire_script(self, now_ms: int) -> None:
        while self._script and self._script[0].at_ms <= now_ms:
            entry = self._script.pop(0)
            kind = ("person-detected"
                    if entry.kind == EmergencyKind.PERSON_ON_PAD
                    else "hazard-detected")
            self.log_event(kind, {
                "reporter": self.callsign, "vertidrome": entry.vertidrome,
                "pad": entry.pad, "kind": entry.kind.value})
            self.publish(EmergencyReport(
                kind=entry.kind, reporter=self.callsign,
                vertidrome=entry.vertidrome, pad=entry.pad,
                detail=entry.detail))
