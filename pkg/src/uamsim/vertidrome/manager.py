"""The vertidrome-side traffic manager.

One instance owns one vertidrome: its pads, the pad schedule, the local
weather picture, hazard handling and the operator-facing state. It talks
to the rest of the world through published message bodies and exposes a
stream of UI events that the operator gateway forwards to the console.

Two operating modes. In the default automatic mode every flight request
is decided immediately and operator pop-ups acknowledge themselves, which
is what headless runs want. With person_in_loop=True a request parks in a
pending list and no decision leaves the building until an ApproveFlight
command arrives from the operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from shapely.geometry import Point, Polygon

from ..messages import (
    Body, DepartureRequest, Decision, EmergencyKind, EmergencyReport,
    EmsConfirmation, EmsDemand, Envelope, FlightPlan, ForecastRow,
    GfmuPreference, LandRequest, Operation, OperationalForecast, PadMode,
    PadStatus, PadStatusNotice, PositionReport, SlotDecision, SlotDisplaced,
    SlotRelease, StatusCause, WeatherReport,
)
from ..uspace import classify_adherence
from .schedule import PadSchedule, Slot, SlotState, overlaps
from .sector import SectorVolume, sector_track

MINUTE_MS = 60_000
FORECAST_BACK_MINUTES = 2
FORECAST_AHEAD_MINUTES = 8
PAD_CAPTURE_M = 1.5
PAD_CAPTURE_HEIGHT_M = 0.5


# -- weather ----------------------------------------------------------------

@dataclass(frozen=True)
class WeatherLimits:
    wind_limit_ms: float = 11.0        # inclusive: at the limit we still fly
    caution_threshold_ms: float = 8.0
    extension_factor: float = 1.5


@dataclass(frozen=True)
class WeatherState:
    wind_direction_deg: float = 0.0
    wind_speed_ms: float = 0.0
    timestamp_ms: int = 0


def evaluate_weather(weather: WeatherState,
                     limits: WeatherLimits) -> tuple[bool, float]:
    """(pads usable, slot extension factor)."""
    usable = weather.wind_speed_ms <= limits.wind_limit_ms
    factor = (limits.extension_factor
              if weather.wind_speed_ms >= limits.caution_threshold_ms else 1.0)
    return usable, factor


# -- pads and close orders ---------------------------------------------------

@dataclass
class CloseOrder:
    order_id: int
    pad: str
    start_ms: int
    duration_ms: int        # 0 = open-ended, stays until cleared
    cause: StatusCause
    detail: str = ""

    def active_at(self, now_ms: int) -> bool:
        if now_ms < self.start_ms:
            return False
        return self.duration_ms <= 0 or now_ms < self.start_ms + self.duration_ms

    def covers(self, start_ms: int, end_ms: int) -> bool:
        if self.duration_ms <= 0:
            return end_ms > self.start_ms
        return overlaps(start_ms, end_ms, self.start_ms,
                        self.start_ms + self.duration_ms)


@dataclass
class Pad:
    pad_id: str
    center: tuple[float, float]
    elevation_m: float = 0.0
    mode: PadMode = PadMode.BOTH
    close_orders: list[CloseOrder] = field(default_factory=list)

    def status(self, now_ms: int) -> PadStatus:
        if any(o.active_at(now_ms) for o in self.close_orders):
            return PadStatus.CLOSED
        return PadStatus.CLEAR

    def effective_mode(self, now_ms: int) -> PadMode:
        return PadMode.NONE if self.status(now_ms) == PadStatus.CLOSED else self.mode

    def active_cause(self, now_ms: int) -> StatusCause | None:
        for order in self.close_orders:
            if order.active_at(now_ms):
                return order.cause
        return None

    def allows(self, operation: Operation) -> bool:
        if self.mode == PadMode.BOTH:
            return True
        return self.mode.value == operation.value


@dataclass
class Popup:
    popup_id: int
    kind: str             # flight-request | notice | hazard | alert
    text: str
    request_id: str = ""
    callsign: str = ""

    def as_json(self) -> dict:
        return {"popup_id": self.popup_id, "kind": self.kind, "text": self.text,
                "request_id": self.request_id, "callsign": self.callsign}


ARRIVAL_STATUS = {True: "LANDED", False: "DEPARTED"}


class VertidromeManager:
    def __init__(self, vertidrome: str, pads: list[Pad],
                 publish: Callable[[Body], None], clock: Callable[[], int],
                 log_event: Callable[[str, dict], None] | None = None,
                 person_in_loop: bool = False,
                 limits: WeatherLimits = WeatherLimits(),
                 sector: SectorVolume = SectorVolume(),
                 spatial_tolerance_m: float = 5.0,
                 temporal_tolerance_ms: int = 30_000):
        self.vertidrome = vertidrome
        self.pads = {p.pad_id: p for p in pads}
        self.publish = publish
        self.clock = clock
        self.log_event = log_event or (lambda kind, payload: None)
        self.person_in_loop = person_in_loop
        self.limits = limits
        self.sector = sector
        self.spatial_tolerance_m = spatial_tolerance_m
        self.temporal_tolerance_ms = temporal_tolerance_ms

        self.schedule = PadSchedule(self.pads.keys())
        self.weather: WeatherState | None = None
        self.gfmu_pads: tuple[str, ...] = ()
        self.plans: dict[str, FlightPlan] = {}
        self.airborne: set[str] = set()
        self.tracks: dict[str, dict] = {}         # callsign -> sector row
        self.popups: list[Popup] = []
        self.pending_requests: dict[str, FlightPlan] = {}
        self.avoid_areas: list[Polygon] = []
        self.alerts: list[dict] = []

        self._ui_listeners: list[Callable[[dict], None]] = []
        self._popup_seq = 0
        self._order_seq = 0
        self._alerted: set[tuple[str, str]] = set()
        self._published_status: dict[str, PadStatus] = {
            p: PadStatus.CLEAR for p in self.pads}
        self.notification_thresholds: dict = {}

    # -- transport wiring ---------------------------------------------------

    def topics(self) -> list[tuple[str, int]]:
        vd = self.vertidrome
        return [
            (f"vertidrome/{vd}/request", 1),
            (f"vertidrome/{vd}/weather", 1),
            (f"vertidrome/{vd}/gfmu", 1),
            ("uspace/emergency", 2),
            ("uspace/position/+", 0),
        ]

    def handle(self, envelope: Envelope) -> None:
        body = envelope.body
        if isinstance(body, (LandRequest, DepartureRequest)):
            self._on_flight_request(body.plan)
        elif isinstance(body, EmsDemand):
            self._on_ems_demand(body)
        elif isinstance(body, SlotRelease):
            self._on_release(body)
        elif isinstance(body, WeatherReport):
            if body.vertidrome == self.vertidrome:
                self._on_weather(body)
        elif isinstance(body, GfmuPreference):
            if body.vertidrome == self.vertidrome:
                self.gfmu_pads = body.preferred_pads
        elif isinstance(body, EmergencyReport):
            self._on_emergency(body)
        elif isinstance(body, PositionReport):
            self._on_position(body)

    # -- UI event stream ------------------------------------------------------

    def add_ui_listener(self, listener: Callable[[dict], None]) -> None:
        self._ui_listeners.append(listener)

    def _ui(self, event: dict) -> None:
        for listener in self._ui_listeners:
            listener(event)

    def on_time(self, now_ms: int) -> None:
        """Clock tick: activate due close orders, refresh displays."""
        for pad in self.pads.values():
            self._sync_pad_status(pad.pad_id)
        self._ui({"event": "clock", "sim_time_ms": now_ms})

    # -- weather ---------------------------------------------------------------

    def _on_weather(self, report: WeatherReport) -> None:
        self.weather = WeatherState(report.wind_direction_deg,
                                    report.wind_speed_ms, report.timestamp_ms)
        usable, factor = evaluate_weather(self.weather, self.limits)
        self.log_event("weather-updated", {
            "vertidrome": self.vertidrome, "speed_ms": report.wind_speed_ms,
            "direction_deg": report.wind_direction_deg, "usable": usable})
        self._ui({"event": "weather",
                  "direction_deg": self.weather.wind_direction_deg,
                  "speed_ms": self.weather.wind_speed_ms})
        self._ui_pads()
        if not usable and self.pending_requests:
            for request_id, plan in list(self.pending_requests.items()):
                del self.pending_requests[request_id]
                self._publish_rejection(plan, "weather")

    def current_weather(self) -> WeatherState:
        return self.weather or WeatherState()

    # -- flight requests ----------------------------------------------------------

    def _on_flight_request(self, plan: FlightPlan) -> None:
        if plan.destination != self.vertidrome and plan.origin != self.vertidrome:
            return
        now = self.clock()
        if plan.slot_end_ms <= now:
            self._publish_rejection(plan, "invalid plan")
            return
        text = (f"{plan.callsign} requests {plan.operation.value} "
                f"{plan.requested_pad} [{plan.slot_start_ms}..{plan.slot_end_ms}] ms")
        if self.person_in_loop:
            self.pending_requests[plan.request_id] = plan
            self._popup("flight-request", text, request_id=plan.request_id,
                        callsign=plan.callsign, sticky=True)
            return
        self._popup("flight-request", text, request_id=plan.request_id,
                    callsign=plan.callsign)
        self._decide_and_publish(plan)

    def compute_decision(self, plan: FlightPlan) \
            -> tuple[bool, str, str | None, int | None, int | None]:
        """(accepted, reason, pad, slot start, slot end) without side effects."""
        now = self.clock()
        usable, factor = evaluate_weather(self.current_weather(), self.limits)
        if not usable:
            return False, "weather", None, None, None
        duration = math.ceil((plan.slot_end_ms - plan.slot_start_ms) * factor)
        start = plan.slot_start_ms
        for pad_id in self._candidate_pads(plan.requested_pad):
            pad = self.pads[pad_id]
            if pad.status(now) == PadStatus.CLOSED or not pad.allows(plan.operation):
                continue
            if any(o.covers(start, start + duration) for o in pad.close_orders):
                continue
            if self.schedule.fits(pad_id, start, start + duration):
                return True, "", pad_id, start, start + duration
        return False, "no slot", None, None, None

    def _candidate_pads(self, requested: str) -> list[str]:
        ordered = [requested, *self.gfmu_pads, *sorted(self.pads)]
        seen: list[str] = []
        for pad_id in ordered:
            if pad_id in self.pads and pad_id not in seen:
                seen.append(pad_id)
        return seen

    def _decide_and_publish(self, plan: FlightPlan) -> None:
        accepted, reason, pad_id, start, end = self.compute_decision(plan)
        if accepted:
            self.schedule.reserve(Slot(
                callsign=plan.callsign, pad=pad_id, start_ms=start, end_ms=end,
                operation=plan.operation, priority=plan.priority,
                request_id=plan.request_id, aircraft_type=plan.aircraft_type,
                route=plan.origin))
            self.plans[plan.callsign] = plan
            self._alerted = {k for k in self._alerted if k[0] != plan.callsign}
            self.publish(SlotDecision(
                vertidrome=self.vertidrome, request_id=plan.request_id,
                decision=Decision.ACCEPTED, pad=pad_id,
                slot_start_ms=start, slot_end_ms=end))
            self.log_event("vertidrome-accepted", {
                "vertidrome": self.vertidrome, "callsign": plan.callsign,
                "pad": pad_id, "slot": [start, end]})
            self._popup("notice", f"{plan.callsign} accepted on {pad_id}",
                        request_id=plan.request_id, callsign=plan.callsign)
            self._ui_forecast()
        else:
            self._publish_rejection(plan, reason)

    def _publish_rejection(self, plan: FlightPlan, reason: str) -> None:
        self.publish(SlotDecision(
            vertidrome=self.vertidrome, request_id=plan.request_id,
            decision=Decision.REJECTED, reason=reason))
        self.log_event("vertidrome-rejected", {
            "vertidrome": self.vertidrome, "callsign": plan.callsign,
            "reason": reason})
        self._popup("notice", f"{plan.callsign} rejected: {reason}",
                    request_id=plan.request_id, callsign=plan.callsign)

    # -- EMS preemption -----------------------------------------------------------

    def _on_ems_demand(self, demand: EmsDemand) -> None:
        now = self.clock()
        duration = demand.window_end_ms - demand.window_start_ms
        pad_id = next((p for p in self._candidate_pads(demand.pad or "")
                       if self.pads[p].status(now) == PadStatus.CLEAR), None)
        if pad_id is None:
            self._popup("hazard", f"EMS demand {demand.request_id}: no open pad")
            self.log_event("ems-unserviceable", {
                "vertidrome": self.vertidrome, "request_id": demand.request_id})
            return
        start = demand.window_start_ms
        for slot in self.schedule.blocking_on(pad_id):
            if slot.state == SlotState.IN_PROGRESS and \
                    overlaps(start, start + duration, slot.start_ms, slot.end_ms):
                start = max(start, slot.end_ms)
        displaced = self.schedule.displace_overlapping(
            pad_id, start, start + duration, demand.priority)
        for slot in displaced:
            self._notify_displaced(slot, "ems preemption")
        window = self._usable_window(pad_id, start, duration)
        if window is None:
            self._popup("hazard", f"EMS demand {demand.request_id}: no window")
            self.log_event("ems-unserviceable", {
                "vertidrome": self.vertidrome, "request_id": demand.request_id})
            return
        start, end = window
        self.schedule.reserve(Slot(
            callsign=demand.callsign, pad=pad_id, start_ms=start, end_ms=end,
            operation=Operation.ARR, priority=demand.priority,
            request_id=demand.request_id, aircraft_type="EMS", route="EMS"))
        self.publish(EmsConfirmation(
            vertidrome=self.vertidrome, request_id=demand.request_id,
            pad=pad_id, slot_start_ms=start, slot_end_ms=end))
        self.log_event("ems-reserved", {
            "vertidrome": self.vertidrome, "request_id": demand.request_id,
            "pad": pad_id, "slot": [start, end]})
        self._popup("hazard", f"EMS slot on {pad_id} for {demand.callsign}")
        self._ui_forecast()

    def _usable_window(self, pad_id: str, start_ms: int,
                       duration_ms: int) -> tuple[int, int] | None:
        """Earliest window clear of both reservations and close orders."""
        pad = self.pads[pad_id]
        for _ in range(64):
            start, end = self.schedule.next_free_window(pad_id, start_ms,
                                                        duration_ms)
            order = next((o for o in pad.close_orders if o.covers(start, end)),
                         None)
            if order is None:
                return start, end
            if order.duration_ms <= 0:
                return None   # open-ended closure, nothing after it is usable
            start_ms = order.start_ms + order.duration_ms
        return None

    def _notify_displaced(self, slot: Slot, reason: str) -> None:
        self.publish(SlotDisplaced(
            vertidrome=self.vertidrome, callsign=slot.callsign,
            request_id=slot.request_id, pad=slot.pad,
            slot_start_ms=slot.start_ms, slot_end_ms=slot.end_ms,
            reason=reason))
        self.log_event("slot-displaced", {
            "vertidrome": self.vertidrome, "callsign": slot.callsign,
            "pad": slot.pad, "reason": reason})

    def _on_release(self, release: SlotRelease) -> None:
        slot = self.schedule.release(release.request_id)
        if slot is not None:
            self.log_event("slot-released", {
                "vertidrome": self.vertidrome, "callsign": release.callsign,
                "request_id": release.request_id})
            self._ui_forecast()

    # -- hazards and pad state ---------------------------------------------------

    def _on_emergency(self, report: EmergencyReport) -> None:
        if report.vertidrome != self.vertidrome:
            return
        if report.kind == EmergencyKind.VEHICLE_DISTRESS:
            self._popup("hazard", f"vehicle distress: {report.callsign}",
                        callsign=report.callsign or "")
            return
        detail = report.detail or report.kind.value
        if report.pad not in self.pads:
            self._popup("hazard",
                        f"hazard report for unknown pad {report.pad!r}: {detail}",
                        sticky=True)
            self.log_event("hazard-unclassified", {
                "vertidrome": self.vertidrome, "pad": report.pad,
                "detail": detail})
            return
        self._close_pad(report.pad, StatusCause.FOREIGN_OBJECT, detail,
                        start_ms=self.clock(), duration_ms=0)

    def _close_pad(self, pad_id: str, cause: StatusCause, detail: str,
                   start_ms: int, duration_ms: int) -> CloseOrder:
        pad = self.pads[pad_id]
        self._order_seq += 1
        order = CloseOrder(order_id=self._order_seq, pad=pad_id,
                           start_ms=start_ms, duration_ms=duration_ms,
                           cause=cause, detail=detail)
        pad.close_orders.append(order)
        window_end = start_ms + duration_ms if duration_ms > 0 else None
        for slot in self.schedule.blocking_on(pad_id):
            if slot.state != SlotState.RESERVED:
                continue
            if window_end is None or overlaps(start_ms, window_end,
                                              slot.start_ms, slot.end_ms):
                slot.state = SlotState.DISPLACED
                self._notify_displaced(slot, f"pad closed: {detail}")
        self._popup("hazard", f"{pad_id} close order ({cause.value}): {detail}")
        self._sync_pad_status(pad_id)
        self._ui_close_orders()
        self._ui_forecast()
        return order

    def _sync_pad_status(self, pad_id: str) -> None:
        """Publish a retained notice iff the pad's status actually changed."""
        pad = self.pads[pad_id]
        now = self.clock()
        status = pad.status(now)
        if status == self._published_status[pad_id]:
            return
        self._published_status[pad_id] = status
        cause = pad.active_cause(now)
        detail = next((o.detail for o in pad.close_orders if o.active_at(now)), "")
        self.publish(PadStatusNotice(
            vertidrome=self.vertidrome, pad=pad_id, status=status,
            mode=pad.effective_mode(now), cause=cause, detail=detail))
        kind = "pad-closed" if status == PadStatus.CLOSED else "pad-cleared"
        self.log_event(kind, {"vertidrome": self.vertidrome, "pad": pad_id,
                              "cause": cause.value if cause else None,
                              "detail": detail})
        self._ui_pads()

    # -- surveillance, sector view, local adherence ---------------------------------

    def _on_position(self, report: PositionReport) -> None:
        slot = self.schedule.blocking_slot_for(report.callsign)
        if slot is None:
            return
        self.airborne.add(report.callsign)
        pad = self.pads[slot.pad]
        track = sector_track(slot.pad, pad.center, pad.elevation_m,
                             report.callsign, report.east_m, report.north_m,
                             report.up_m, self.sector)
        had = report.callsign in self.tracks
        if track is not None:
            if not had:
                self.log_event("sector-entry", {
                    "vertidrome": self.vertidrome, "callsign": report.callsign,
                    "pad": slot.pad})
                if slot.state == SlotState.RESERVED:
                    slot.state = SlotState.IN_PROGRESS
                    self._ui_forecast()
            row = {"pad": track.pad, "callsign": track.callsign,
                   "azimuth_deg": track.azimuth_deg,
                   "distance_m": track.distance_m,
                   "rel_altitude_m": track.rel_altitude_m}
            if self.tracks.get(report.callsign) != row:
                self.tracks[report.callsign] = row
                self._ui_sector()
        elif had:
            del self.tracks[report.callsign]
            self.log_event("sector-exit", {
                "vertidrome": self.vertidrome, "callsign": report.callsign})
            if slot.operation == Operation.DEP \
                    and slot.state == SlotState.IN_PROGRESS:
                slot.state = SlotState.COMPLETED
                self.log_event("departed", {
                    "vertidrome": self.vertidrome, "callsign": slot.callsign,
                    "pad": slot.pad})
                self._ui_forecast()
            self._ui_sector()

        if slot.operation == Operation.ARR \
                and math.hypot(report.east_m - pad.center[0],
                               report.north_m - pad.center[1]) <= PAD_CAPTURE_M \
                and report.up_m - pad.elevation_m <= PAD_CAPTURE_HEIGHT_M:
            self._on_landed(slot, report)
            return
        if track is not None and report.callsign in self.plans:
            self._local_adherence(slot, report)

    def _on_landed(self, slot: Slot, report: PositionReport) -> None:
        slot.state = SlotState.COMPLETED
        within = slot.start_ms <= report.timestamp_ms <= slot.end_ms
        kind = "landed-within-slot" if within else "landed-outside-slot"
        self.log_event(kind, {
            "vertidrome": self.vertidrome, "callsign": slot.callsign,
            "pad": slot.pad, "timestamp_ms": report.timestamp_ms,
            "slot": [slot.start_ms, slot.end_ms]})
        self.tracks.pop(slot.callsign, None)
        self.airborne.discard(slot.callsign)
        self._alerted = {k for k in self._alerted if k[0] != slot.callsign}
        self._ui_sector()
        self._ui_forecast()

    def _local_adherence(self, slot: Slot, report: PositionReport) -> None:
        plan = self.plans[report.callsign]
        point = Point(report.east_m, report.north_m)
        if any(area.covers(point) for area in self.avoid_areas):
            self._deviation_alert(report.callsign, "avoid-area",
                                  "inside an avoid area")
            return
        if report.timestamp_ms > slot.end_ms:
            self._deviation_alert(report.callsign, "temporal",
                                  "arrival drifting past slot end")
            return
        result = classify_adherence(plan, report, self.spatial_tolerance_m,
                                    self.temporal_tolerance_ms)
        if not result.conforming:
            self._deviation_alert(
                report.callsign, result.deviation.value.lower(),
                f"{result.value:.1f} over a limit of {result.limit:.1f}")

    def _deviation_alert(self, callsign: str, kind: str, detail: str) -> None:
        if (callsign, kind) in self._alerted:
            return
        self._alerted.add((callsign, kind))
        alert = {"callsign": callsign, "kind": kind, "detail": detail}
        self.alerts.append(alert)
        self.log_event("local-deviation", {
            "vertidrome": self.vertidrome, **alert})
        self._ui({"event": "alert", **alert})
        self._popup("alert", f"{callsign} deviation ({kind}): {detail}",
                    callsign=callsign)

    def add_avoid_area(self, corners: list[tuple[float, float]]) -> None:
        self.avoid_areas.append(Polygon(corners))

    # -- pop-ups -------------------------------------------------------------

    def _popup(self, kind: str, text: str, request_id: str = "",
               callsign: str = "", sticky: bool = False) -> Popup:
        self._popup_seq += 1
        popup = Popup(self._popup_seq, kind, text, request_id, callsign)
        self.popups.append(popup)
        self._ui({"event": "popup", "popup": popup.as_json()})
        if not self.person_in_loop and not sticky:
            self._clear_popup(popup.popup_id)
        return popup

    def _clear_popup(self, popup_id: int) -> bool:
        for popup in self.popups:
            if popup.popup_id == popup_id:
                self.popups.remove(popup)
                self._ui({"event": "popup-cleared", "popup_id": popup_id})
                return True
        return False

    # -- operator commands -------------------------------------------------------

    def apply_vso(self, cmd: dict) -> dict:
        """Execute one operator command; returns {"ok": bool, "reason": str}."""
        kind = cmd.get("command")
        handler = getattr(self, f"_vso_{_snake(kind)}", None) if kind else None
        if handler is None:
            return {"ok": False, "reason": f"unknown command {kind!r}"}
        try:
            result = handler(cmd)
        except (KeyError, TypeError, ValueError) as exc:
            return {"ok": False, "reason": f"bad arguments: {exc}"}
        self.log_event("vso-command", {
            "vertidrome": self.vertidrome, "cmd": kind, "ok": result["ok"]})
        return result

    def _vso_acknowledge_request(self, cmd: dict) -> dict:
        if self._clear_popup(int(cmd["popup_id"])):
            return {"ok": True, "reason": ""}
        return {"ok": False, "reason": "no such pop-up"}

    def _vso_approve_flight(self, cmd: dict) -> dict:
        plan = self.pending_requests.pop(cmd["request_id"], None)
        if plan is None:
            return {"ok": False, "reason": "no pending request"}
        self._drop_request_popup(cmd["request_id"])
        self._decide_and_publish(plan)
        return {"ok": True, "reason": ""}

    def _vso_cancel_flight(self, cmd: dict) -> dict:
        request_id = cmd["request_id"]
        plan = self.pending_requests.pop(request_id, None)
        if plan is not None:
            self._drop_request_popup(request_id)
            self._publish_rejection(plan, "cancelled by VSO")
            return {"ok": True, "reason": ""}
        slot = self.schedule.slot_for_request(request_id)
        if slot is not None:
            slot.state = SlotState.DISPLACED
            self._notify_displaced(slot, "cancelled by VSO")
            self._ui_forecast()
            return {"ok": True, "reason": ""}
        return {"ok": False, "reason": "unknown request"}

    def _drop_request_popup(self, request_id: str) -> None:
        for popup in list(self.popups):
            if popup.request_id == request_id and popup.kind == "flight-request":
                self._clear_popup(popup.popup_id)

    def _vso_create_close_order(self, cmd: dict) -> dict:
        pad_id = cmd["pad"]
        if pad_id not in self.pads:
            return {"ok": False, "reason": f"unknown pad {pad_id!r}"}
        start = int(cmd.get("start_ms", self.clock()))
        duration = int(cmd.get("duration_ms", 0))
        self._close_pad(pad_id, StatusCause.OPERATOR,
                        cmd.get("detail", "operator close order"),
                        start_ms=start, duration_ms=duration)
        return {"ok": True, "reason": ""}

    def _vso_clear_close_order(self, cmd: dict) -> dict:
        order_id = int(cmd["order_id"])
        for pad in self.pads.values():
            for order in pad.close_orders:
                if order.order_id == order_id:
                    pad.close_orders.remove(order)
                    self._sync_pad_status(pad.pad_id)
                    self._ui_close_orders()
                    return {"ok": True, "reason": ""}
        return {"ok": False, "reason": "no such close order"}

    def _vso_reassign_slot(self, cmd: dict) -> dict:
        slot = self.schedule.blocking_slot_for(cmd["callsign"])
        if slot is None:
            return {"ok": False, "reason": "no reservation for that flight"}
        if slot.state != SlotState.RESERVED:
            return {"ok": False, "reason": "flight already on final"}
        pad_id = cmd["pad"]
        pad = self.pads.get(pad_id)
        if pad is None:
            return {"ok": False, "reason": f"unknown pad {pad_id!r}"}
        start = int(cmd.get("start_ms", slot.start_ms))
        end = start + (slot.end_ms - slot.start_ms)
        if pad.status(self.clock()) == PadStatus.CLOSED \
                or any(o.covers(start, end) for o in pad.close_orders):
            return {"ok": False, "reason": "pad closed"}
        self.schedule.slots.remove(slot)
        if not self.schedule.fits(pad_id, start, end):
            self.schedule.slots.append(slot)
            return {"ok": False, "reason": "window occupied"}
        slot.pad, slot.start_ms, slot.end_ms = pad_id, start, end
        self.schedule.slots.append(slot)
        self._ui_forecast()
        return {"ok": True, "reason": ""}

    def _vso_set_adherence_criteria(self, cmd: dict) -> dict:
        self.spatial_tolerance_m = float(cmd.get("spatial_m",
                                                 self.spatial_tolerance_m))
        self.temporal_tolerance_ms = int(cmd.get(
            "temporal_s", self.temporal_tolerance_ms / 1000) * 1000)
        return {"ok": True, "reason": ""}

    def _vso_set_notification_thresholds(self, cmd: dict) -> dict:
        self.notification_thresholds.update(
            {k: v for k, v in cmd.items() if k != "command"})
        return {"ok": True, "reason": ""}

    # -- forecast ----------------------------------------------------------------

    def operational_forecast(self, now_ms: int | None = None) -> OperationalForecast:
        now = self.clock() if now_ms is None else now_ms
        base = (now // MINUTE_MS) * MINUTE_MS
        minutes = [base + k * MINUTE_MS
                   for k in range(-FORECAST_BACK_MINUTES,
                                  FORECAST_AHEAD_MINUTES + 1)]
        rows = []
        for slot in self.schedule.slots:
            bin_minute = round(slot.start_ms / MINUTE_MS) * MINUTE_MS
            if bin_minute not in minutes:
                continue
            rows.append(ForecastRow(
                minute_ms=bin_minute, pad=slot.pad, callsign=slot.callsign,
                route=slot.route, priority=slot.priority,
                operation=slot.operation, aircraft=slot.aircraft_type,
                status=self._slot_status(slot)))
        rows.sort(key=lambda r: (r.minute_ms, r.pad))
        return OperationalForecast(vertidrome=self.vertidrome,
                                   generated_at_ms=now, rows=tuple(rows))

    def _slot_status(self, slot: Slot) -> str:
        if slot.state == SlotState.DISPLACED:
            return "CANCELLED"
        if slot.state == SlotState.COMPLETED:
            return ARRIVAL_STATUS[slot.operation == Operation.ARR]
        if slot.callsign in self.airborne:
            return "AIRBORNE"
        return "SCHEDULED"

    def forecast_grid(self, now_ms: int | None = None) -> dict:
        """The 11-row x per-pad table the operator display shows."""
        forecast = self.operational_forecast(now_ms)
        base = (forecast.generated_at_ms // MINUTE_MS) * MINUTE_MS
        minutes = [base + k * MINUTE_MS
                   for k in range(-FORECAST_BACK_MINUTES,
                                  FORECAST_AHEAD_MINUTES + 1)]
        by_key: dict[tuple[int, str], ForecastRow] = {}
        for row in forecast.rows:
            by_key.setdefault((row.minute_ms, row.pad), row)
        grid_rows = []
        for minute in minutes:
            cells = {}
            for pad_id in sorted(self.pads):
                row = by_key.get((minute, pad_id))
                cells[pad_id] = None if row is None else {
                    "callsign": row.callsign, "aircraft": row.aircraft,
                    "priority": row.priority,
                    "operation": row.operation.value if row.operation else "",
                    "route": row.route, "status": row.status}
            grid_rows.append({"minute_ms": minute, "cells": cells})
        return {"generated_at_ms": forecast.generated_at_ms, "rows": grid_rows}

    def _ui_forecast(self) -> None:
        grid = self.forecast_grid()
        self.publish(self.operational_forecast(grid["generated_at_ms"]))
        self._ui({"event": "forecast", **grid})

    # -- UI panel builders ---------------------------------------------------------

    def pad_rows(self) -> list[dict]:
        now = self.clock()
        rows = []
        for pad_id in sorted(self.pads):
            pad = self.pads[pad_id]
            cause = pad.active_cause(now)
            pending = next((o.start_ms for o in pad.close_orders
                            if o.start_ms > now), None)
            rows.append({"pad": pad_id, "status": pad.status(now).value,
                         "mode": pad.effective_mode(now).value,
                         "cause": cause.value if cause else None,
                         "pending_close_ms": pending})
        return rows

    def sector_rows(self) -> list[dict]:
        return sorted(self.tracks.values(),
                      key=lambda r: (r["pad"], r["callsign"]))

    def close_order_rows(self) -> list[dict]:
        rows = []
        for pad in self.pads.values():
            for order in pad.close_orders:
                rows.append({"order_id": order.order_id, "pad": order.pad,
                             "start_ms": order.start_ms,
                             "duration_ms": order.duration_ms,
                             "cause": order.cause.value,
                             "detail": order.detail})
        return sorted(rows, key=lambda r: r["order_id"])

    def _ui_pads(self) -> None:
        self._ui({"event": "pads", "rows": self.pad_rows()})

    def _ui_sector(self) -> None:
        self._ui({"event": "sector", "rows": self.sector_rows()})

    def _ui_close_orders(self) -> None:
        self._ui({"event": "close-orders", "rows": self.close_order_rows()})

    def snapshot(self) -> dict:
        weather = self.current_weather()
        return {
            "event": "snapshot",
            "vertidrome": self.vertidrome,
            "sim_time_ms": self.clock(),
            "sector": self.sector_rows(),
            "pads": self.pad_rows(),
            "weather": {"direction_deg": weather.wind_direction_deg,
                        "speed_ms": weather.wind_speed_ms},
            "popups": [p.as_json() for p in self.popups],
            "close_orders": self.close_order_rows(),
            "forecast": self.forecast_grid(),
            "alerts": list(self.alerts),
        }


def _snake(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)
