"""U-space side services: registration, flight authorisation with strategic
deconfliction, surveillance relay, adherence monitoring and the emergency
service. One UspaceService instance plays all of them; they share the plan
table the way departments share a database.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from . import trajectory
from .messages import (
    AdherenceNotice, Body, Decision, DeviationKind, EmergencyKind,
    EmergencyReport, EmsConfirmation, EmsDemand, Envelope, FlightAuthorisation,
    FlightPlan, FlightPlanFiling, LandRequest, DepartureRequest, Operation,
    PositionReport, Registration, RegistryRequest, SlotDecision,
    TelemetrySample, EMS_PRIORITY,
)

DEFAULT_SPATIAL_TOLERANCE_M = 5.0
DEFAULT_TEMPORAL_TOLERANCE_MS = 30_000
LANDING_CAPTURE_M = 1.5


# -- adherence ---------------------------------------------------------------

@dataclass(frozen=True)
class AdherenceResult:
    deviation: DeviationKind | None
    value: float = 0.0
    limit: float = 0.0

    @property
    def conforming(self) -> bool:
        return self.deviation is None


def classify_adherence(plan: FlightPlan, report, spatial_m: float = DEFAULT_SPATIAL_TOLERANCE_M,
                       temporal_ms: int = DEFAULT_TEMPORAL_TOLERANCE_MS) -> AdherenceResult:
    """Compare a position report against the plan.

    Schedule first: the report is projected onto the route and its timestamp
    compared with the planned time of being there, so a vehicle that is on
    the path but behind schedule reads as a temporal deviation, not a spatial
    one. Off-path displacement is then measured against the plan position
    interpolated at the report's timestamp.
    """
    point = (report.east_m, report.north_m, report.up_m)
    arc_s, _ = trajectory.project_to_path(plan.waypoints, point)
    planned_t = trajectory.time_at_arc_length(plan.waypoints, arc_s)
    delay_ms = abs(report.timestamp_ms - planned_t)
    if delay_ms > temporal_ms:
        return AdherenceResult(DeviationKind.TEMPORAL, value=delay_ms / 1000.0,
                               limit=temporal_ms / 1000.0)
    planned_pos = trajectory.position_at(plan.waypoints, report.timestamp_ms,
                                         clamp=True)
    error_m = math.dist(point, planned_pos)
    if error_m > spatial_m:
        return AdherenceResult(DeviationKind.SPATIAL, value=error_m,
                               limit=spatial_m)
    return AdherenceResult(None)


# -- registration ---------------------------------------------------------------

class Registry:
    """Operator/serial registration with stable, idempotent identifiers."""

    def __init__(self):
        self._by_key: dict[tuple[str, str], str] = {}

    def register_uas(self, operator: str, serial: str) -> str:
        key = (operator, serial)
        if key not in self._by_key:
            self._by_key[key] = f"UAS-{len(self._by_key) + 1:04d}"
        return self._by_key[key]

    def __len__(self) -> int:
        return len(self._by_key)


# -- plan bookkeeping --------------------------------------------------------------

class PlanState(Enum):
    FILED = "Filed"
    APPROVED = "Approved"
    ACTIVE = "Active"
    COMPLETED = "Completed"
    CANCELLED = "Cancelled"


@dataclass
class PlanRecord:
    plan: FlightPlan
    state: PlanState
    confirmed_pad: str | None = None
    confirmed_slot: tuple[int, int] | None = None
    deny_reason: str = ""


# -- the service -------------------------------------------------------------------

class UspaceService:
    """Registration, authorisation, surveillance, adherence and EMS."""

    def __init__(self, publish: Callable[[Body], None], clock: Callable[[], int],
                 log_event: Callable[[str, dict], None] | None = None,
                 spatial_tolerance_m: float = DEFAULT_SPATIAL_TOLERANCE_M,
                 temporal_tolerance_ms: int = DEFAULT_TEMPORAL_TOLERANCE_MS,
                 minima: trajectory.SeparationMinima = trajectory.SeparationMinima()):
        self.publish = publish
        self.clock = clock
        self.log_event = log_event or (lambda kind, payload: None)
        self.spatial_tolerance_m = spatial_tolerance_m
        self.temporal_tolerance_ms = temporal_tolerance_ms
        self.minima = minima
        self.registry = Registry()
        self.registered_callsigns: set[str] = set()
        # request_id -> filed plan awaiting the vertidrome's word
        self.pending: dict[str, FlightPlan] = {}
        # callsign -> current record (one live plan per callsign)
        self.records: dict[str, PlanRecord] = {}
        self.dropped_reports = 0
        self.relayed_reports = 0
        self._last_relayed_ms: dict[str, int] = {}
        self._ems_seq = 0
        self._deviation_counts: dict[str, int] = {}

    # -- wiring -------------------------------------------------------------

    def topics(self) -> list[tuple[str, int]]:
        return [
            ("uspace/registry/request", 1),
            ("uspace/flightplan/request", 1),
            ("vertidrome/+/decision", 1),
            ("uspace/telemetry/+", 0),
            ("uspace/emergency", 2),
        ]

    def handle(self, envelope: Envelope) -> None:
        body = envelope.body
        if isinstance(body, RegistryRequest):
            self._on_registry_request(body)
        elif isinstance(body, FlightPlanFiling):
            self._on_filing(body.plan)
        elif isinstance(body, SlotDecision):
            self._on_slot_decision(body)
        elif isinstance(body, EmsConfirmation):
            self.log_event("ems-confirmed", {
                "vertidrome": body.vertidrome, "pad": body.pad,
                "request_id": body.request_id})
        elif isinstance(body, TelemetrySample):
            self._on_telemetry(body)
        elif isinstance(body, EmergencyReport):
            self._on_emergency(body)

    # -- registration --------------------------------------------------------

    def _on_registry_request(self, req: RegistryRequest) -> None:
        uas_id = self.registry.register_uas(req.operator, req.serial)
        self.registered_callsigns.add(req.callsign)
        self.publish(Registration(operator=req.operator, serial=req.serial,
                                  callsign=req.callsign, uas_id=uas_id))

    # -- filing and authorisation ---------------------------------------------

    def _on_filing(self, plan: FlightPlan) -> None:
        self.pending[plan.request_id] = plan
        request = (LandRequest(plan=plan) if plan.operation == Operation.ARR
                   else DepartureRequest(plan=plan))
        self.publish(request)
        self.log_event("uspace-submitted", {
            "callsign": plan.callsign, "request_id": plan.request_id,
            "vertidrome": plan.destination})

    def _on_slot_decision(self, decision: SlotDecision) -> None:
        plan = self.pending.pop(decision.request_id, None)
        if plan is None:
            return  # EMS confirmations and unrelated traffic
        approved, reason = self.authorize_flight(plan, decision)
        if approved:
            # the confirmed slot may differ from the requested one
            old = self.records.get(plan.callsign)
            if old is not None and old.state in (PlanState.FILED,
                                                 PlanState.APPROVED,
                                                 PlanState.ACTIVE):
                old.state = PlanState.CANCELLED
            self.records[plan.callsign] = PlanRecord(
                plan=plan, state=PlanState.APPROVED,
                confirmed_pad=decision.pad,
                confirmed_slot=(decision.slot_start_ms, decision.slot_end_ms))
            self.publish(FlightAuthorisation(
                callsign=plan.callsign, request_id=plan.request_id,
                approved=True, pad=decision.pad,
                slot_start_ms=decision.slot_start_ms,
                slot_end_ms=decision.slot_end_ms))
            self.log_event("authorisation-issued", {
                "callsign": plan.callsign, "request_id": plan.request_id,
                "pad": decision.pad})
        else:
            self.records.setdefault(
                plan.callsign,
                PlanRecord(plan=plan, state=PlanState.CANCELLED))
            self.records[plan.callsign].deny_reason = reason
            self.publish(FlightAuthorisation(
                callsign=plan.callsign, request_id=plan.request_id,
                approved=False, reason=reason))
            self.log_event("authorisation-denied", {
                "callsign": plan.callsign, "request_id": plan.request_id,
                "reason": reason})

    def authorize_flight(self, plan: FlightPlan,
                         decision: SlotDecision) -> tuple[bool, str]:
        """Strategic gate: vertidrome word, registration, then traffic."""
        if decision.decision != Decision.ACCEPTED:
            return False, f"vertidrome rejected: {decision.reason}" if decision.reason \
                else "vertidrome rejected"
        if plan.callsign not in self.registered_callsigns:
            return False, "unregistered"
        blocking = [r.plan for r in self.records.values()
                    if r.state in (PlanState.APPROVED, PlanState.ACTIVE)]
        conflict = trajectory.find_conflict(plan, blocking, self.minima)
        if conflict is not None:
            return False, f"conflict with {conflict.callsign}"
        return True, ""

    # -- surveillance and adherence ---------------------------------------------

    def _on_telemetry(self, sample: TelemetrySample) -> None:
        if sample.callsign not in self.registered_callsigns:
            self.dropped_reports += 1
            return
        last = self._last_relayed_ms.get(sample.callsign)
        if last is not None and sample.timestamp_ms <= last:
            self.dropped_reports += 1
            return
        self._last_relayed_ms[sample.callsign] = sample.timestamp_ms
        self.relayed_reports += 1
        self.publish(PositionReport(
            callsign=sample.callsign, east_m=sample.east_m,
            north_m=sample.north_m, up_m=sample.up_m,
            ground_speed_ms=sample.ground_speed_ms,
            timestamp_ms=sample.timestamp_ms))
        record = self.records.get(sample.callsign)
        if record is None:
            return
        if record.state == PlanState.APPROVED:
            record.state = PlanState.ACTIVE
            self.log_event("tracking-active", {"callsign": sample.callsign})
        if record.state != PlanState.ACTIVE:
            return
        last_wp = record.plan.waypoints[-1]
        if math.dist((sample.east_m, sample.north_m, sample.up_m),
                     (last_wp.east_m, last_wp.north_m, last_wp.up_m)) <= LANDING_CAPTURE_M \
                and sample.timestamp_ms >= record.plan.waypoints[0].eta_ms:
            record.state = PlanState.COMPLETED
            self.log_event("plan-completed", {"callsign": sample.callsign})
            return
        result = classify_adherence(record.plan, sample,
                                    self.spatial_tolerance_m,
                                    self.temporal_tolerance_ms)
        if not result.conforming:
            count = self._deviation_counts.get(sample.callsign, 0) + 1
            self._deviation_counts[sample.callsign] = count
            unit = "m" if result.deviation == DeviationKind.SPATIAL else "s"
            self.publish(AdherenceNotice(
                callsign=sample.callsign, deviation=result.deviation,
                value=result.value, limit=result.limit,
                timestamp_ms=sample.timestamp_ms,
                detail=f"{result.value:.1f} {unit} against a limit of "
                       f"{result.limit:.1f} {unit}"))

    # -- emergencies ----------------------------------------------------------

    def _on_emergency(self, report: EmergencyReport) -> None:
        self.log_event("emergency-received", {
            "kind": report.kind.value, "vertidrome": report.vertidrome,
            "pad": report.pad, "callsign": report.callsign,
            "reporter": report.reporter})
        if report.kind == EmergencyKind.VEHICLE_DISTRESS and report.vertidrome:
            self.ems_demand(report.vertidrome, report.callsign or "UNKNOWN",
                            pad=report.pad)

    def ems_demand(self, vertidrome: str, callsign: str,
                   pad: str | None = None,
                   window_ms: int = 300_000) -> EmsDemand:
        """Demand a pad window at maximum priority."""
        self._ems_seq += 1
        now = self.clock()
        demand = EmsDemand(vertidrome=vertidrome, callsign=callsign,
                           request_id=f"EMS-{self._ems_seq:03d}",
                           window_start_ms=now, window_end_ms=now + window_ms,
                           pad=pad, priority=EMS_PRIORITY)
        self.publish(demand)
        self.log_event("ems-demand", {
            "vertidrome": vertidrome, "callsign": callsign,
            "request_id": demand.request_id})
        return demand

    # -- queries ----------------------------------------------------------------

    def plan_state(self, callsign: str) -> PlanState | None:
        record = self.records.get(callsign)
        return record.state if record else None

    def deviation_count(self, callsign: str) -> int:
        return self._deviation_counts.get(callsign, 0)
