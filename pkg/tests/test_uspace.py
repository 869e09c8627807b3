from __future__ import annotations

import random

import pytest

from uamsim import messages as m
from uamsim import trajectory as tj
from uamsim.uspace import (
    PlanState, Registry, UspaceService, classify_adherence,
)
from test_trajectory import corridor, random_plan


class Harness:
    """UspaceService with captured output and a hand-cranked clock."""

    def __init__(self, now_ms: int = 0):
        self.now_ms = now_ms
        self.published: list[m.Body] = []
        self.events: list[tuple[str, dict]] = []
        self.seq = 0
        self.svc = UspaceService(
            publish=self.published.append,
            clock=lambda: self.now_ms,
            log_event=lambda kind, payload: self.events.append((kind, payload)))

    def deliver(self, body: m.Body, sender: str = "test"):
        self.seq += 1
        self.svc.handle(m.make_envelope(sender, self.seq, self.now_ms, body))

    def register(self, callsign: str, operator: str = "OP", serial: str | None = None):
        self.deliver(m.RegistryRequest(operator=operator,
                                       serial=serial or f"SN-{callsign}",
                                       callsign=callsign))

    def file_plan(self, plan: m.FlightPlan):
        self.deliver(m.FlightPlanFiling(plan=plan))

    def decide(self, plan: m.FlightPlan, accepted: bool = True,
               pad: str | None = "PAD1", reason: str = ""):
        self.deliver(m.SlotDecision(
            vertidrome=plan.destination, request_id=plan.request_id,
            decision=m.Decision.ACCEPTED if accepted else m.Decision.REJECTED,
            pad=pad if accepted else None,
            slot_start_ms=plan.slot_start_ms if accepted else None,
            slot_end_ms=plan.slot_end_ms if accepted else None,
            reason=reason))

    def telemetry(self, callsign: str, pos, t_ms: int, speed: float = 2.0):
        self.deliver(m.TelemetrySample(
            callsign=callsign, east_m=pos[0], north_m=pos[1], up_m=pos[2],
            ground_speed_ms=speed, timestamp_ms=t_ms))

    def last_authorisation(self) -> m.FlightAuthorisation:
        auths = [b for b in self.published
                 if isinstance(b, m.FlightAuthorisation)]
        assert auths, "no authorisation published"
        return auths[-1]


# -- registry ------------------------------------------------------------------

def test_registration_is_idempotent():
    registry = Registry()
    first = registry.register_uas("HHLA Sky", "SN-1")
    again = registry.register_uas("HHLA Sky", "SN-1")
    other = registry.register_uas("HHLA Sky", "SN-2")
    assert first == again == "UAS-0001"
    assert other == "UAS-0002"
    assert len(registry) == 2


def test_registration_ids_unique_at_volume():
    registry = Registry()
    ids = {registry.register_uas("OP", f"SN-{i}") for i in range(2_000)}
    assert len(ids) == 2_000


def test_registry_response_published():
    h = Harness()
    h.register("UAV1")
    [response] = h.published
    assert isinstance(response, m.Registration)
    assert response.uas_id == "UAS-0001"
    assert response.callsign == "UAV1"


# -- adherence classification ------------------------------------------------------

def on_plan_report(plan, t_ms):
    pos = tj.position_at(plan.waypoints, t_ms)
    return m.TelemetrySample(callsign=plan.callsign, east_m=pos[0],
                             north_m=pos[1], up_m=pos[2], ground_speed_ms=2.0,
                             timestamp_ms=t_ms)


def test_on_plan_on_time_is_conforming():
    plan = corridor("A", (0, 0, 10), (100, 0, 10), 0, 50_000)
    result = classify_adherence(plan, on_plan_report(plan, 25_000))
    assert result.conforming


def test_late_on_path_reads_as_temporal():
    plan = corridor("A", (0, 0, 10), (200, 0, 10), 0, 100_000)
    # at t=80 s the vehicle is only where it should have been at t=40 s
    report = m.TelemetrySample(callsign="A", east_m=80.0, north_m=0.0,
                               up_m=10.0, ground_speed_ms=2.0,
                               timestamp_ms=80_000)
    result = classify_adherence(plan, report)
    assert result.deviation == m.DeviationKind.TEMPORAL
    assert result.value == pytest.approx(40.0)
    assert result.limit == pytest.approx(30.0)


def test_off_path_on_time_reads_as_spatial():
    plan = corridor("A", (0, 0, 10), (100, 0, 10), 0, 50_000)
    report = m.TelemetrySample(callsign="A", east_m=50.0, north_m=8.0,
                               up_m=10.0, ground_speed_ms=2.0,
                               timestamp_ms=25_000)
    result = classify_adherence(plan, report)
    assert result.deviation == m.DeviationKind.SPATIAL
    assert result.value == pytest.approx(8.0)
    assert result.limit == pytest.approx(5.0)


def test_small_errors_stay_conforming():
    plan = corridor("A", (0, 0, 10), (100, 0, 10), 0, 50_000)
    report = m.TelemetrySample(callsign="A", east_m=50.0, north_m=4.0,
                               up_m=10.0, ground_speed_ms=2.0,
                               timestamp_ms=26_000)
    assert classify_adherence(plan, report).conforming


def test_unmodified_flight_never_deviates():
    rng = random.Random(11)
    for trial in range(20):
        plan = random_plan(rng, f"T{trial}")
        for _ in range(25):
            t = rng.randint(plan.waypoints[0].eta_ms, plan.waypoints[-1].eta_ms)
            assert classify_adherence(plan, on_plan_report(plan, t)).conforming


# -- authorisation -------------------------------------------------------------------

def approved_plan(h: Harness, plan: m.FlightPlan) -> m.FlightAuthorisation:
    h.register(plan.callsign)
    h.file_plan(plan)
    h.decide(plan)
    return h.last_authorisation()


def test_filing_is_forwarded_to_the_vertidrome():
    h = Harness()
    plan = corridor("UAV1", (0, 330, 0), (0, 0, 0), 0, 180_000)
    h.file_plan(plan)
    [forwarded] = [b for b in h.published if isinstance(b, m.LandRequest)]
    assert forwarded.plan == plan
    assert ("uspace-submitted", {"callsign": "UAV1", "request_id": "r",
                                 "vertidrome": "d"}) in h.events


def test_departure_filing_forwards_departure_request():
    h = Harness()
    wps = (m.Waypoint(0, 0, 0, 0), m.Waypoint(0, 100, 15, 60_000))
    plan = m.FlightPlan(callsign="UAV1", aircraft_type="E",
                        operation=m.Operation.DEP, origin="VD1",
                        destination="VD1", requested_pad="PAD1", priority=1,
                        slot_start_ms=0, slot_end_ms=60_000, waypoints=wps,
                        request_id="dep-1")
    h.file_plan(plan)
    assert any(isinstance(b, m.DepartureRequest) for b in h.published)


def test_accepted_registered_clear_traffic_is_authorised():
    h = Harness()
    plan = corridor("UAV1", (0, 330, 0), (0, 0, 0), 0, 180_000)
    auth = approved_plan(h, plan)
    assert auth.approved
    assert auth.pad == "PAD1"
    assert (auth.slot_start_ms, auth.slot_end_ms) == (0, 240_000)
    assert h.svc.plan_state("UAV1") == PlanState.APPROVED


def test_vertidrome_rejection_wins_regardless_of_traffic():
    h = Harness()
    plan = corridor("UAV1", (0, 330, 0), (0, 0, 0), 0, 180_000)
    h.register("UAV1")
    h.file_plan(plan)
    h.decide(plan, accepted=False, reason="pad closed")
    auth = h.last_authorisation()
    assert not auth.approved
    assert "vertidrome rejected" in auth.reason


def test_unregistered_callsign_is_denied():
    h = Harness()
    plan = corridor("GHOST", (0, 330, 0), (0, 0, 0), 0, 180_000)
    h.file_plan(plan)
    h.decide(plan)
    auth = h.last_authorisation()
    assert not auth.approved
    assert auth.reason == "unregistered"


def test_conflicting_second_plan_is_denied():
    h = Harness()
    first = corridor("UAV1", (0, 0, 10), (100, 0, 10), 0, 50_000,
                     request_id="r1")
    second = corridor("UAV2", (50, -50, 10), (50, 50, 10), 0, 50_000,
                      request_id="r2")
    assert approved_plan(h, first).approved
    auth = approved_plan(h, second)
    assert not auth.approved
    assert auth.reason == "conflict with UAV1"
    denial = [e for e in h.events if e[0] == "authorisation-denied"]
    assert denial and denial[0][1]["reason"] == "conflict with UAV1"


def test_same_route_well_separated_in_time_is_approved():
    h = Harness()
    first = corridor("UAV1", (0, 0, 10), (100, 0, 10), 0, 50_000,
                     request_id="r1")
    second = corridor("UAV2", (0, 0, 10), (100, 0, 10), 600_000, 650_000,
                      request_id="r2")
    assert approved_plan(h, first).approved
    assert approved_plan(h, second).approved


def test_refiling_supersedes_own_plan_without_self_conflict():
    h = Harness()
    original = corridor("UAV1", (0, 0, 10), (100, 0, 10), 0, 50_000,
                        request_id="r1")
    assert approved_plan(h, original).approved
    # same corridor shifted a second: would conflict with itself
    refiled = corridor("UAV1", (0, 0, 10), (100, 0, 10), 1_000, 51_000,
                       request_id="r2")
    h.file_plan(refiled)
    h.decide(refiled)
    assert h.last_authorisation().approved
    assert h.svc.records["UAV1"].plan.request_id == "r2"


# -- surveillance relay -----------------------------------------------------------

def test_relay_republishes_registered_reports():
    h = Harness()
    h.register("UAV1")
    h.telemetry("UAV1", (1.0, 2.0, 15.0), 1_000)
    [report] = [b for b in h.published if isinstance(b, m.PositionReport)]
    assert (report.east_m, report.north_m, report.up_m) == (1.0, 2.0, 15.0)
    assert h.svc.relayed_reports == 1


def test_relay_drops_unregistered():
    h = Harness()
    h.telemetry("GHOST", (0, 0, 0), 1_000)
    assert not [b for b in h.published if isinstance(b, m.PositionReport)]
    assert h.svc.dropped_reports == 1


def test_relay_drops_stale_and_duplicate_timestamps():
    h = Harness()
    h.register("UAV1")
    h.telemetry("UAV1", (0, 0, 0), 2_000)
    h.telemetry("UAV1", (0, 0, 0), 2_000)   # duplicate
    h.telemetry("UAV1", (0, 0, 0), 1_500)   # older
    h.telemetry("UAV1", (0, 0, 0), 2_500)   # fresh again
    reports = [b for b in h.published if isinstance(b, m.PositionReport)]
    assert [r.timestamp_ms for r in reports] == [2_000, 2_500]
    assert h.svc.dropped_reports == 2


def test_first_report_activates_plan():
    h = Harness()
    plan = corridor("UAV1", (0, 0, 10), (100, 0, 10), 10_000, 60_000)
    approved_plan(h, plan)
    h.telemetry("UAV1", (0.0, 0.0, 10.0), 10_000)
    assert h.svc.plan_state("UAV1") == PlanState.ACTIVE
    assert ("tracking-active", {"callsign": "UAV1"}) in h.events


def test_arrival_at_final_waypoint_completes_plan():
    h = Harness()
    plan = corridor("UAV1", (0, 0, 10), (100, 0, 10), 10_000, 60_000)
    approved_plan(h, plan)
    h.telemetry("UAV1", (0.0, 0.0, 10.0), 10_000)
    h.telemetry("UAV1", (99.5, 0.0, 10.0), 60_000)
    assert h.svc.plan_state("UAV1") == PlanState.COMPLETED
    assert ("plan-completed", {"callsign": "UAV1"}) in h.events


def test_adherence_notice_published_for_deviating_flight():
    h = Harness()
    plan = corridor("UAV1", (0, 0, 10), (100, 0, 10), 0, 50_000)
    approved_plan(h, plan)
    h.telemetry("UAV1", (0.0, 0.0, 10.0), 0)
    h.telemetry("UAV1", (50.0, 20.0, 10.0), 25_000)  # 20 m abeam of plan
    notices = [b for b in h.published if isinstance(b, m.AdherenceNotice)]
    assert len(notices) == 1
    assert notices[0].deviation == m.DeviationKind.SPATIAL
    assert notices[0].value == pytest.approx(20.0)
    assert h.svc.deviation_count("UAV1") == 1


def test_conforming_flight_generates_no_notices():
    h = Harness()
    plan = corridor("UAV1", (0, 0, 10), (100, 0, 10), 0, 50_000)
    approved_plan(h, plan)
    for t in range(0, 50_001, 500):
        pos = tj.position_at(plan.waypoints, t)
        h.telemetry("UAV1", pos, t)
    assert not [b for b in h.published if isinstance(b, m.AdherenceNotice)]


# -- emergency service ---------------------------------------------------------------

def test_vehicle_distress_places_ems_demand():
    h = Harness(now_ms=50_000)
    h.deliver(m.EmergencyReport(kind=m.EmergencyKind.VEHICLE_DISTRESS,
                                reporter="UAV2", vertidrome="VD1",
                                callsign="UAV2"))
    [demand] = [b for b in h.published if isinstance(b, m.EmsDemand)]
    assert demand.priority == m.EMS_PRIORITY
    assert demand.vertidrome == "VD1"
    assert (demand.window_start_ms, demand.window_end_ms) == (50_000, 350_000)
    assert ("emergency-received",
            {"kind": "VehicleDistress", "vertidrome": "VD1", "pad": None,
             "callsign": "UAV2", "reporter": "UAV2"}) in h.events


def test_person_report_logged_but_no_demand():
    h = Harness()
    h.deliver(m.EmergencyReport(kind=m.EmergencyKind.PERSON_ON_PAD,
                                reporter="UAV2", vertidrome="VD1", pad="PAD1"))
    assert not [b for b in h.published if isinstance(b, m.EmsDemand)]
    assert h.events[0][0] == "emergency-received"
