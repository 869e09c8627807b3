"""4D trajectory geometry: sampling, interpolation, conflict detection.

A trajectory is the waypoint list of a flight plan, linearly interpolated.
Conflict detection samples both plans on their own 0.1 s lattices and slides
one against the other over every time offset inside the temporal separation
window; two plans conflict when horizontal, vertical and temporal separation
are all simultaneously inside the minima.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .messages import FlightPlan, Waypoint

SEP_HORIZONTAL_M = 10.0
SEP_VERTICAL_M = 5.0
SEP_TEMPORAL_MS = 10_000
SAMPLE_STEP_MS = 100


@dataclass(frozen=True)
class SeparationMinima:
    horizontal_m: float = SEP_HORIZONTAL_M
    vertical_m: float = SEP_VERTICAL_M
    temporal_ms: int = SEP_TEMPORAL_MS


def path_length_m(waypoints: tuple[Waypoint, ...]) -> float:
    total = 0.0
    for a, b in zip(waypoints, waypoints[1:]):
        total += math.dist((a.east_m, a.north_m, a.up_m),
                           (b.east_m, b.north_m, b.up_m))
    return total


def cumulative_arc_lengths(waypoints: tuple[Waypoint, ...]) -> list[float]:
    out = [0.0]
    for a, b in zip(waypoints, waypoints[1:]):
        out.append(out[-1] + math.dist((a.east_m, a.north_m, a.up_m),
                                       (b.east_m, b.north_m, b.up_m)))
    return out


def position_at(waypoints: tuple[Waypoint, ...], t_ms: int,
                clamp: bool = False) -> tuple[float, float, float] | None:
    """Interpolated position at t_ms, or None outside the plan's span."""
    if t_ms < waypoints[0].eta_ms:
        if not clamp:
            return None
        t_ms = waypoints[0].eta_ms
    if t_ms > waypoints[-1].eta_ms:
        if not clamp:
            return None
        t_ms = waypoints[-1].eta_ms
    for a, b in zip(waypoints, waypoints[1:]):
        if t_ms <= b.eta_ms:
            f = (t_ms - a.eta_ms) / (b.eta_ms - a.eta_ms)
            return (a.east_m + f * (b.east_m - a.east_m),
                    a.north_m + f * (b.north_m - a.north_m),
                    a.up_m + f * (b.up_m - a.up_m))
    return None


def sample_lattice(waypoints: tuple[Waypoint, ...],
                   step_ms: int = SAMPLE_STEP_MS) -> tuple[np.ndarray, np.ndarray]:
    """(times, positions) sampled on the plan's own lattice {start + k*step}."""
    times = np.arange(waypoints[0].eta_ms, waypoints[-1].eta_ms + 1, step_ms,
                      dtype=np.int64)
    etas = np.array([w.eta_ms for w in waypoints], dtype=np.float64)
    cols = [np.interp(times, etas, np.array([getattr(w, axis) for w in waypoints]))
            for axis in ("east_m", "north_m", "up_m")]
    return times, np.column_stack(cols)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def plans_conflict(plan_a: FlightPlan, plan_b: FlightPlan,
                   minima: SeparationMinima = SeparationMinima(),
                   step_ms: int = SAMPLE_STEP_MS) -> bool:
    """True when any sample pair violates all three separation minima at once.

    Sample i of plan A and sample j of plan B are |delta + (i-j)*step| apart
    in time (delta = difference of the plans' start instants), so the pairs
    inside the temporal window form diagonals of constant offset k = j - i.
    Each diagonal is one vectorized comparison of aligned array slices.
    """
    _, pos_a = sample_lattice(plan_a.waypoints, step_ms)
    _, pos_b = sample_lattice(plan_b.waypoints, step_ms)
    delta = plan_a.waypoints[0].eta_ms - plan_b.waypoints[0].eta_ms
    k_min = _ceil_div(delta - minima.temporal_ms, step_ms)
    k_max = (delta + minima.temporal_ms) // step_ms
    n, m = len(pos_a), len(pos_b)
    h_sq = minima.horizontal_m ** 2
    for k in range(k_min, k_max + 1):
        lo = max(0, -k)
        hi = min(n, m - k)
        if hi <= lo:
            continue
        d = pos_a[lo:hi] - pos_b[lo + k:hi + k]
        horizontal = d[:, 0] ** 2 + d[:, 1] ** 2 <= h_sq
        vertical = np.abs(d[:, 2]) <= minima.vertical_m
        if np.any(horizontal & vertical):
            return True
    return False


def find_conflict(plan: FlightPlan, others, minima: SeparationMinima = SeparationMinima(),
                  step_ms: int = SAMPLE_STEP_MS) -> FlightPlan | None:
    """First plan in others that conflicts with plan; same callsign is exempt
    (a vehicle cannot lose separation against itself)."""
    for other in others:
        if other.callsign == plan.callsign:
            continue
        if plans_conflict(plan, other, minima, step_ms):
            return other
    return None


def project_to_path(waypoints: tuple[Waypoint, ...],
                    point: tuple[float, float, float]) -> tuple[float, float]:
    """(arc length of the closest path point, 3D offset to it)."""
    px, py, pz = point
    cumulative = cumulative_arc_lengths(waypoints)
    best_s = 0.0
    best_d = math.inf
    for i, (a, b) in enumerate(zip(waypoints, waypoints[1:])):
        ax, ay, az = a.east_m, a.north_m, a.up_m
        dx, dy, dz = b.east_m - ax, b.north_m - ay, b.up_m - az
        seg_sq = dx * dx + dy * dy + dz * dz
        if seg_sq == 0:
            f = 0.0
        else:
            f = ((px - ax) * dx + (py - ay) * dy + (pz - az) * dz) / seg_sq
            f = min(1.0, max(0.0, f))
        cx, cy, cz = ax + f * dx, ay + f * dy, az + f * dz
        d = math.dist((px, py, pz), (cx, cy, cz))
        if d < best_d:
            best_d = d
            best_s = cumulative[i] + f * math.sqrt(seg_sq)
    return best_s, best_d


def time_at_arc_length(waypoints: tuple[Waypoint, ...], s: float) -> int:
    """Planned time of reaching arc length s (clamped to the plan's span)."""
    cumulative = cumulative_arc_lengths(waypoints)
    if s <= 0:
        return waypoints[0].eta_ms
    for i in range(len(waypoints) - 1):
        if s <= cumulative[i + 1]:
            seg = cumulative[i + 1] - cumulative[i]
            f = 0.0 if seg == 0 else (s - cumulative[i]) / seg
            span = waypoints[i + 1].eta_ms - waypoints[i].eta_ms
            return round(waypoints[i].eta_ms + f * span)
    return waypoints[-1].eta_ms
