"""Fleet operator: plans routes around no-fly volumes, files them, walks each
flight through its lifecycle and diverts to an alternate vertidrome when the
destination pad closes mid-flight.

Route planning is A* over an 8-connected grid (1 m cells) with no-fly
polygons inflated by a clearance margin; collinear points are dropped from
the result. Everything else here is message-driven bookkeeping: the manager
consumes decisions, pad status and vehicle reports, and answers with
filings, slot releases and vehicle commands.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Sequence

from shapely.geometry import LineString, Point, Polygon
from shapely.prepared import prep

from . import trajectory
from .messages import (
    Body, CommandKind, Decision, EmergencyKind, EmergencyReport, Envelope,
    FlightAuthorisation, FlightPlan, FlightPlanFiling, Operation, PadStatus,
    PadStatusNotice, PositionReport, Registration, RegistryRequest,
    SlotDecision, SlotRelease, VehicleCommand, VehicleMode, VehicleStatus,
    Waypoint,
)

GRID_CELL_M = 1.0
CLEARANCE_M = 2.0
DEFAULT_CRUISE_MS = 2.0
DEFAULT_CRUISE_ALT_M = 30.0
DEFAULT_SLOT_LEAD_MS = 10_000
DEFAULT_SLOT_TAIL_MS = 50_000
MAX_GRID_CELLS = 2_000_000

_SQRT2 = math.sqrt(2.0)


class WorldError(Exception):
    pass


class PlanningError(Exception):
    pass


# -- the shared world ---------------------------------------------------------

@dataclass(frozen=True)
class PadSite:
    """One landing pad as the fleet sees it, with its approach geometry."""
    vertidrome: str
    pad: str
    center: tuple[float, float]
    elevation_m: float = 0.0
    # approach corridor: an azimuth interval (clockwise from north) and the
    # radius at which the approach fix sits; radius 0 means fly straight in
    approach_deg: tuple[float, float] = (0.0, 360.0)
    approach_radius_m: float = 0.0

    def approach_fix(self) -> tuple[float, float] | None:
        if self.approach_radius_m <= 0:
            return None
        lo, hi = self.approach_deg
        span = (hi - lo) % 360.0
        azimuth = math.radians((lo + span / 2.0) % 360.0)
        return (self.center[0] + self.approach_radius_m * math.sin(azimuth),
                self.center[1] + self.approach_radius_m * math.cos(azimuth))


class WorldMap:
    """No-fly polygons plus the pads every operator plans against."""

    def __init__(self, geofences: Sequence[Sequence[tuple[float, float]]],
                 pads: Sequence[PadSite]):
        self.geofences = [tuple((float(x), float(y)) for x, y in fence)
                          for fence in geofences]
        self.pads = list(pads)
        self._polygons = [Polygon(fence) for fence in self.geofences]
        self._inflated: dict[float, list] = {}
        self._validate()

    def _validate(self) -> None:
        for i, poly in enumerate(self._polygons):
            if len(poly.exterior.coords) < 4 or not poly.is_valid:
                raise WorldError(f"geofence {i} is not a simple polygon")
        for site in self.pads:
            point = Point(site.center)
            for i, poly in enumerate(self._polygons):
                if poly.covers(point):
                    raise WorldError(
                        f"pad {site.vertidrome}/{site.pad} lies inside geofence {i}")

    def pad(self, vertidrome: str, pad: str | None = None) -> PadSite:
        candidates = self.pads_of(vertidrome)
        if not candidates:
            raise WorldError(f"unknown vertidrome {vertidrome!r}")
        if pad is None:
            return candidates[0]
        for site in candidates:
            if site.pad == pad:
                return site
        raise WorldError(f"unknown pad {vertidrome}/{pad}")

    def pads_of(self, vertidrome: str) -> list[PadSite]:
        return sorted((s for s in self.pads if s.vertidrome == vertidrome),
                      key=lambda s: s.pad)

    def contains(self, x: float, y: float) -> bool:
        point = Point(x, y)
        return any(poly.covers(point) for poly in self._polygons)

    def inflated(self, clearance_m: float = CLEARANCE_M) -> list:
        key = round(clearance_m, 6)
        if key not in self._inflated:
            self._inflated[key] = [poly.buffer(clearance_m)
                                   for poly in self._polygons]
        return self._inflated[key]

    def segment_clear(self, a: tuple[float, float], b: tuple[float, float],
                      clearance_m: float = CLEARANCE_M) -> bool:
        if not self._polygons:
            return True
        line = LineString([a, b])
        return not any(poly.intersects(line)
                       for poly in self.inflated(clearance_m))


# -- grid planning --------------------------------------------------------------

def _blocked_cells(world: WorldMap, x0: float, y0: float, nx: int, ny: int,
                   cell: float, clearance_m: float) -> set[tuple[int, int]]:
    blocked: set[tuple[int, int]] = set()
    for poly in world.inflated(clearance_m):
        minx, miny, maxx, maxy = poly.bounds
        i_lo = max(0, math.floor((minx - x0) / cell))
        i_hi = min(nx - 1, math.ceil((maxx - x0) / cell))
        j_lo = max(0, math.floor((miny - y0) / cell))
        j_hi = min(ny - 1, math.ceil((maxy - y0) / cell))
        prepared = prep(poly)
        for i in range(i_lo, i_hi + 1):
            x = x0 + i * cell
            for j in range(j_lo, j_hi + 1):
                if prepared.covers(Point(x, y0 + j * cell)):
                    blocked.add((i, j))
    return blocked


_MOVES = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, _SQRT2), (1, -1, _SQRT2), (-1, 1, _SQRT2), (-1, -1, _SQRT2))


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (_SQRT2 - 1.0) * min(dx, dy)


def _astar(blocked: set[tuple[int, int]], nx: int, ny: int,
           start: tuple[int, int], goal: tuple[int, int]) -> list[tuple[int, int]] | None:
    if start == goal:
        return [start]
    counter = itertools.count()
    open_heap = [(0.0, next(counter), start)]
    g = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    while open_heap:
        _, _, node = heapq.heappop(open_heap)
        if node in closed:
            continue
        if node == goal:
            path = [node]
            while node in parent:
                node = parent[node]
                path.append(node)
            path.reverse()
            return path
        closed.add(node)
        for dx, dy, cost in _MOVES:
            nxt = (node[0] + dx, node[1] + dy)
            if not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny):
                continue
            if nxt in blocked or nxt in closed:
                continue
            # no squeezing diagonally between two blocked corners
            if dx and dy and ((node[0] + dx, node[1]) in blocked
                              or (node[0], node[1] + dy) in blocked):
                continue
            tentative = g[node] + cost
            if tentative < g.get(nxt, math.inf):
                g[nxt] = tentative
                parent[nxt] = node
                heapq.heappush(open_heap,
                               (tentative + _octile(nxt, goal),
                                next(counter), nxt))
    return None


def _drop_collinear(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for p in points:
        if out and math.dist(out[-1], p) < 1e-9:
            continue
        while len(out) >= 2:
            a, b = out[-2], out[-1]
            cross = (b[0] - a[0]) * (p[1] - b[1]) - (b[1] - a[1]) * (p[0] - b[0])
            along = (b[0] - a[0]) * (p[0] - b[0]) + (b[1] - a[1]) * (p[1] - b[1])
            if abs(cross) < 1e-9 and along >= 0:
                out.pop()
            else:
                break
        out.append(p)
    return out


def plan_horizontal(origin: tuple[float, float], dest: tuple[float, float],
                    world: WorldMap, clearance_m: float = CLEARANCE_M,
                    cell: float = GRID_CELL_M) -> list[tuple[float, float]]:
    """Shortest clear path in the horizontal plane, as few points as possible."""
    origin = (float(origin[0]), float(origin[1]))
    dest = (float(dest[0]), float(dest[1]))
    if world.contains(*origin):
        raise PlanningError("origin lies inside a geofence")
    if world.contains(*dest):
        raise PlanningError("destination lies inside a geofence")
    if world.segment_clear(origin, dest, clearance_m):
        return [origin, dest] if math.dist(origin, dest) > 1e-9 else [origin]

    xs = [origin[0], dest[0]]
    ys = [origin[1], dest[1]]
    for fence in world.geofences:
        for x, y in fence:
            xs.append(x)
            ys.append(y)
    margin = clearance_m + 3.0 * cell
    # anchor the lattice on the origin so it starts on a cell center
    x0 = origin[0] - cell * math.ceil((origin[0] - (min(xs) - margin)) / cell)
    y0 = origin[1] - cell * math.ceil((origin[1] - (min(ys) - margin)) / cell)
    nx = int(math.ceil((max(xs) + margin - x0) / cell)) + 1
    ny = int(math.ceil((max(ys) + margin - y0) / cell)) + 1
    if nx * ny > MAX_GRID_CELLS:
        raise PlanningError("planning area too large for the grid")

    blocked = _blocked_cells(world, x0, y0, nx, ny, cell, clearance_m)
    start = (round((origin[0] - x0) / cell), round((origin[1] - y0) / cell))
    goal = (round((dest[0] - x0) / cell), round((dest[1] - y0) / cell))
    blocked.discard(start)
    blocked.discard(goal)
    cells = _astar(blocked, nx, ny, start, goal)
    if cells is None:
        raise PlanningError("no clear path exists on the planning grid")
    points = [(x0 + i * cell, y0 + j * cell) for i, j in cells]
    points[0] = origin
    points.append(dest)
    return _drop_collinear(points)


def path_length(points: Iterable[tuple[float, float]]) -> float:
    points = list(points)
    return sum(math.dist(a, b) for a, b in zip(points, points[1:]))


# -- full plans -------------------------------------------------------------------

def plan_route(origin: tuple[float, float, float], pad_site: PadSite,
               world: WorldMap, *, callsign: str, request_id: str,
               aircraft_type: str = "", origin_name: str = "",
               operation: Operation = Operation.ARR, priority: int = 1,
               cruise_ms: float = DEFAULT_CRUISE_MS,
               cruise_alt_m: float = DEFAULT_CRUISE_ALT_M,
               depart_ms: int = 0,
               slot_lead_ms: int = DEFAULT_SLOT_LEAD_MS,
               slot_tail_ms: int = DEFAULT_SLOT_TAIL_MS,
               clearance_m: float = CLEARANCE_M) -> FlightPlan:
    """A geofence-clear 4D route from a point to a pad, ready to file.

    The horizontal path runs from the origin to the pad's approach fix (when
    it has one) and then straight onto the pad. Altitude is a climb to the
    cruise level over the origin, level flight, and a final descent over the
    pad. Waypoint times are cumulative distance over the cruise speed.
    """
    fix = pad_site.approach_fix()
    target = fix if fix is not None else pad_site.center
    path = plan_horizontal((origin[0], origin[1]), target, world, clearance_m)
    if fix is not None:
        if not world.segment_clear(fix, pad_site.center, clearance_m):
            raise PlanningError("approach segment crosses a geofence")
        path.append(pad_site.center)

    points: list[tuple[float, float, float]] = [(origin[0], origin[1], origin[2])]
    if abs(origin[2] - cruise_alt_m) > 1e-9:
        points.append((origin[0], origin[1], cruise_alt_m))
    for x, y in path[1:]:
        points.append((x, y, cruise_alt_m))
    if abs(pad_site.elevation_m - cruise_alt_m) > 1e-9:
        points.append((pad_site.center[0], pad_site.center[1],
                       pad_site.elevation_m))

    waypoints: list[Waypoint] = []
    t = float(depart_ms)
    previous: tuple[float, float, float] | None = None
    for point in points:
        if previous is not None:
            leg = math.dist(previous, point)
            if leg < 1e-9:
                continue
            t += 1000.0 * leg / cruise_ms
        waypoints.append(Waypoint(point[0], point[1], point[2], round(t)))
        previous = point
    if len(waypoints) < 2:
        raise PlanningError("route has no length")

    landing_ms = waypoints[-1].eta_ms
    return FlightPlan(
        callsign=callsign, aircraft_type=aircraft_type, operation=operation,
        origin=origin_name, destination=pad_site.vertidrome,
        requested_pad=pad_site.pad, priority=priority,
        slot_start_ms=landing_ms - slot_lead_ms,
        slot_end_ms=landing_ms + slot_tail_ms,
        waypoints=tuple(waypoints), request_id=request_id)


def delay_plan(plan: FlightPlan, delay_ms: int) -> FlightPlan:
    """The same route, departing later; geometry untouched."""
    return replace(
        plan,
        slot_start_ms=plan.slot_start_ms + delay_ms,
        slot_end_ms=plan.slot_end_ms + delay_ms,
        waypoints=tuple(replace(w, eta_ms=w.eta_ms + delay_ms)
                        for w in plan.waypoints))


def strategic_self_deconflict(
        plans: Sequence[FlightPlan],
        minima: trajectory.SeparationMinima = trajectory.SeparationMinima(),
) -> list[FlightPlan]:
    """Shift departures by multiples of the temporal separation until the
    4D conflict predicate clears every pair. Earlier filings keep their
    times; each later plan takes the smallest delay that works against the
    ones already placed.
    """
    placed: list[FlightPlan] = []
    for plan in plans:
        candidate = plan
        while any(trajectory.plans_conflict(candidate, other, minima)
                  for other in placed if other.callsign != candidate.callsign):
            candidate = delay_plan(candidate, minima.temporal_ms)
        placed.append(candidate)
    return placed


# -- flight lifecycle ---------------------------------------------------------------

class FlightState(Enum):
    PLANNED = "Planned"
    FILED = "Filed"
    APPROVED = "Approved"
    ACTIVE = "Active"
    REROUTING = "Rerouting"
    LANDED = "Landed"
    CANCELLED = "Cancelled"


_EDGES = {
    FlightState.PLANNED: {FlightState.FILED, FlightState.CANCELLED},
    FlightState.FILED: {FlightState.APPROVED, FlightState.PLANNED,
                        FlightState.CANCELLED},
    FlightState.APPROVED: {FlightState.ACTIVE, FlightState.CANCELLED},
    FlightState.ACTIVE: {FlightState.LANDED, FlightState.REROUTING},
    FlightState.REROUTING: {FlightState.FILED},
    FlightState.LANDED: set(),
    FlightState.CANCELLED: set(),
}

INITIAL_LEG = "initial"
REROUTED_LEG = "rerouted"


@dataclass
class FleetFlight:
    callsign: str
    plan: FlightPlan
    alternates: list[str] = field(default_factory=list)
    state: FlightState = FlightState.PLANNED
    leg: str = INITIAL_LEG
    reason: str = ""
    confirmed_pad: str | None = None
    confirmed_slot: tuple[int, int] | None = None
    position: tuple[float, float, float] | None = None
    position_ms: int = 0

    @property
    def destination(self) -> str:
        return self.plan.destination

    @property
    def terminal(self) -> bool:
        return self.state in (FlightState.LANDED, FlightState.CANCELLED)


class FleetManager:
    """One operator's side of the protocol.

    Owns the flight table, keyed by callsign; request ids are minted here
    and map decisions back to flights. A flight enters the table Planned,
    is filed once its vehicle is registered, and then moves on the messages
    alone.
    """

    def __init__(self, operator: str, world: WorldMap,
                 publish: Callable[[Body], None], clock: Callable[[], int],
                 log_event: Callable[[str, dict], None] | None = None, *,
                 cruise_ms: float = DEFAULT_CRUISE_MS,
                 cruise_alt_m: float = DEFAULT_CRUISE_ALT_M,
                 minima: trajectory.SeparationMinima | None = None,
                 slot_lead_ms: int = DEFAULT_SLOT_LEAD_MS,
                 slot_tail_ms: int = DEFAULT_SLOT_TAIL_MS):
        self.operator = operator
        self.world = world
        self.publish = publish
        self.clock = clock
        self.log_event = log_event or (lambda kind, payload: None)
        self.cruise_ms = cruise_ms
        self.cruise_alt_m = cruise_alt_m
        self.minima = minima or trajectory.SeparationMinima()
        self.slot_lead_ms = slot_lead_ms
        self.slot_tail_ms = slot_tail_ms
        self.flights: dict[str, FleetFlight] = {}
        self.registered: set[str] = set()
        self._by_request: dict[str, str] = {}
        self._request_seq: dict[str, int] = {}
        self._closed_pads: set[tuple[str, str]] = set()
        self._pending_takeoffs: list[str] = []

    # -- wiring ---------------------------------------------------------------

    def topics(self) -> list[tuple[str, int]]:
        return [("uspace/registry/response", 1),
                ("uspace/flightplan/decision/+", 1),
                ("vertidrome/+/decision", 1),
                ("vertidrome/+/padstatus", 1),
                ("uspace/position/+", 0),
                ("fleet/+/status", 1)]

    def handle(self, envelope: Envelope) -> None:
        body = envelope.body
        if isinstance(body, Registration):
            self._on_registration(body)
        elif isinstance(body, FlightAuthorisation):
            self._on_authorisation(body)
        elif isinstance(body, SlotDecision):
            self._on_slot_decision(body)
        elif isinstance(body, PadStatusNotice):
            self._on_pad_status(body)
        elif isinstance(body, PositionReport):
            self._on_position(body)
        elif isinstance(body, VehicleStatus):
            self._on_vehicle_status(body)

    # -- planning and filing -----------------------------------------------------

    def _next_request_id(self, callsign: str) -> str:
        n = self._request_seq.get(callsign, 0) + 1
        self._request_seq[callsign] = n
        return f"{callsign}-{n}"

    def add_flight(self, callsign: str, origin: tuple[float, float, float],
                   destination: str, *, aircraft_type: str = "",
                   requested_pad: str | None = None,
                   alternates: Sequence[str] = (), origin_name: str = "",
                   depart_ms: int = 0, priority: int = 1) -> FleetFlight:
        """Plan the primary route and put the flight on the books; it is
        filed as soon as its registration comes back."""
        site = self.world.pad(destination, requested_pad)
        plan = plan_route(
            origin, site, self.world, callsign=callsign,
            request_id=self._next_request_id(callsign),
            aircraft_type=aircraft_type, origin_name=origin_name,
            priority=priority, cruise_ms=self.cruise_ms,
            cruise_alt_m=self.cruise_alt_m, depart_ms=depart_ms,
            slot_lead_ms=self.slot_lead_ms, slot_tail_ms=self.slot_tail_ms)
        flight = FleetFlight(callsign=callsign, plan=plan,
                             alternates=list(alternates))
        self.flights[callsign] = flight
        self.publish(RegistryRequest(operator=self.operator,
                                     serial=f"SN-{callsign}",
                                     callsign=callsign))
        if callsign in self.registered:
            self._file(flight)
        return flight

    def _transition(self, flight: FleetFlight, to: FlightState) -> bool:
        if to not in _EDGES[flight.state]:
            self.log_event("transition-refused", {
                "callsign": flight.callsign,
                "from": flight.state.value, "to": to.value})
            return False
        flight.state = to
        return True

    def _file(self, flight: FleetFlight) -> None:
        others = [f.plan for f in self.flights.values()
                  if f is not flight and not f.terminal
                  and f.state != FlightState.PLANNED]
        adjusted = strategic_self_deconflict([*others, flight.plan],
                                             self.minima)[-1]
        if adjusted is not flight.plan:
            self.log_event("departure-shifted", {
                "callsign": flight.callsign,
                "delay_ms": adjusted.waypoints[0].eta_ms
                - flight.plan.waypoints[0].eta_ms})
            flight.plan = adjusted
        if not self._transition(flight, FlightState.FILED):
            return
        self._by_request[flight.plan.request_id] = flight.callsign
        self.publish(FlightPlanFiling(plan=flight.plan))
        kind = "plan-filed" if flight.leg == INITIAL_LEG else "alternate-filed"
        self.log_event(kind, {
            "callsign": flight.callsign, "request_id": flight.plan.request_id,
            "vertidrome": flight.plan.destination,
            "pad": flight.plan.requested_pad})

    # -- message handling -----------------------------------------------------------

    def _on_registration(self, reg: Registration) -> None:
        if reg.operator != self.operator:
            return
        self.registered.add(reg.callsign)
        flight = self.flights.get(reg.callsign)
        if flight is not None and flight.state == FlightState.PLANNED:
            self._file(flight)

    def _flight_for_request(self, request_id: str) -> FleetFlight | None:
        callsign = self._by_request.get(request_id)
        if callsign is None:
            return None
        flight = self.flights.get(callsign)
        if flight is None or flight.plan.request_id != request_id:
            return None
        return flight

    def _on_slot_decision(self, decision: SlotDecision) -> None:
        flight = self._flight_for_request(decision.request_id)
        if flight is None or decision.decision != Decision.ACCEPTED:
            return
        flight.confirmed_pad = decision.pad
        flight.confirmed_slot = (decision.slot_start_ms, decision.slot_end_ms)
        if flight.leg == REROUTED_LEG and flight.state == FlightState.FILED:
            self.log_event("alternate-accepted", {
                "callsign": flight.callsign,
                "vertidrome": decision.vertidrome, "pad": decision.pad,
                "slot": [decision.slot_start_ms, decision.slot_end_ms]})

    def _on_authorisation(self, auth: FlightAuthorisation) -> None:
        flight = self._flight_for_request(auth.request_id)
        if flight is None or flight.state != FlightState.FILED:
            return
        if not auth.approved:
            flight.reason = auth.reason
            self._transition(flight, FlightState.PLANNED)
            self.log_event("authorisation-refused", {
                "callsign": flight.callsign, "reason": auth.reason})
            return
        if not self._transition(flight, FlightState.APPROVED):
            return
        if flight.leg == INITIAL_LEG:
            if flight.plan.start_ms > self.clock():
                self._pending_takeoffs.append(flight.callsign)
            else:
                self._send_takeoff(flight)
        else:
            self.log_event("alternate-approved", {
                "callsign": flight.callsign,
                "vertidrome": flight.plan.destination,
                "pad": auth.pad})
            self.publish(VehicleCommand(callsign=flight.callsign,
                                        command=CommandKind.UPLOAD_ROUTE,
                                        plan=flight.plan))

    def _send_takeoff(self, flight: FleetFlight) -> None:
        self.publish(VehicleCommand(callsign=flight.callsign,
                                    command=CommandKind.TAKE_OFF,
                                    plan=flight.plan))

    def on_time(self, now_ms: int) -> None:
        """Issue take-off commands whose departure time has come."""
        due = [cs for cs in self._pending_takeoffs
               if self.flights[cs].plan.start_ms <= now_ms]
        for callsign in due:
            self._pending_takeoffs.remove(callsign)
            flight = self.flights[callsign]
            if flight.state == FlightState.APPROVED:
                self._send_takeoff(flight)

    def _on_pad_status(self, notice: PadStatusNotice) -> None:
        key = (notice.vertidrome, notice.pad)
        if notice.status == PadStatus.CLOSED:
            self._closed_pads.add(key)
        else:
            self._closed_pads.discard(key)
            return
        for flight in self.flights.values():
            if (flight.state == FlightState.ACTIVE
                    and flight.plan.destination == notice.vertidrome
                    and self._lands_on(flight, notice.pad)):
                self.log_event("closure-received-by-fleet", {
                    "callsign": flight.callsign,
                    "vertidrome": notice.vertidrome, "pad": notice.pad})
                self._reroute(flight)

    def _lands_on(self, flight: FleetFlight, pad: str) -> bool:
        assigned = flight.confirmed_pad or flight.plan.requested_pad
        return assigned == pad

    def _open_alternate(self, flight: FleetFlight) -> PadSite | None:
        for vertidrome in flight.alternates:
            for site in self.world.pads_of(vertidrome):
                if (vertidrome, site.pad) not in self._closed_pads:
                    return site
        return None

    def _reroute(self, flight: FleetFlight) -> None:
        if not self._transition(flight, FlightState.REROUTING):
            return
        now = self.clock()
        site = self._open_alternate(flight)
        if site is None:
            self.log_event("distress-declared", {
                "callsign": flight.callsign, "reason": "no open alternate"})
            self.publish(EmergencyReport(
                kind=EmergencyKind.VEHICLE_DISTRESS, reporter=self.operator,
                vertidrome=flight.plan.destination,
                pad=flight.confirmed_pad or flight.plan.requested_pad,
                callsign=flight.callsign, detail="destination closed"))
            return
        position = flight.position
        if position is None:
            position = trajectory.position_at(flight.plan.waypoints, now,
                                              clamp=True)
        old = flight.plan
        new_plan = plan_route(
            position, site, self.world, callsign=flight.callsign,
            request_id=self._next_request_id(flight.callsign),
            aircraft_type=old.aircraft_type, origin_name=old.origin,
            priority=old.priority, cruise_ms=self.cruise_ms,
            cruise_alt_m=position[2], depart_ms=now,
            slot_lead_ms=self.slot_lead_ms, slot_tail_ms=self.slot_tail_ms,
            operation=old.operation)
        flight.plan = new_plan
        flight.leg = REROUTED_LEG
        flight.confirmed_pad = None
        flight.confirmed_slot = None
        self.publish(SlotRelease(vertidrome=old.destination,
                                 request_id=old.request_id,
                                 callsign=flight.callsign))
        self._file(flight)

    def _on_position(self, report: PositionReport) -> None:
        flight = self.flights.get(report.callsign)
        if flight is None or report.timestamp_ms < flight.position_ms:
            return
        flight.position = (report.east_m, report.north_m, report.up_m)
        flight.position_ms = report.timestamp_ms

    def _on_vehicle_status(self, status: VehicleStatus) -> None:
        flight = self.flights.get(status.callsign)
        if flight is None:
            return
        if status.event == "takeoff-refused":
            flight.reason = status.detail
            if self._transition(flight, FlightState.CANCELLED):
                self.publish(SlotRelease(
                    vertidrome=flight.plan.destination,
                    request_id=flight.plan.request_id,
                    callsign=flight.callsign))
                self.log_event("flight-cancelled", {
                    "callsign": flight.callsign, "reason": status.detail})
            return
        if (status.mode in (VehicleMode.TAKING_OFF, VehicleMode.ENROUTE)
                and flight.state == FlightState.APPROVED):
            self._transition(flight, FlightState.ACTIVE)
        elif status.mode == VehicleMode.LANDED \
                and flight.state == FlightState.ACTIVE:
            self._transition(flight, FlightState.LANDED)
            if flight.leg == REROUTED_LEG:
                self.log_event("landed-at-alternate", {
                    "callsign": flight.callsign,
                    "vertidrome": flight.plan.destination,
                    "pad": flight.confirmed_pad or flight.plan.requested_pad})
            self.log_event("plan-concluded", {
                "callsign": flight.callsign, "leg": flight.leg})

    # -- queries ------------------------------------------------------------------

    def all_terminal(self) -> bool:
        return all(f.terminal for f in self.flights.values())
