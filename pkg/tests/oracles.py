"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way and shares no
code with src/. When a test compares the package against one of these, both
sides answering the same is the point of the test.
"""
from __future__ import annotations

import math


def reference_remaining_length(n: int) -> bytes:
    """7 bits per byte, continuation flag on every byte except the last."""
    if n == 0:
        return b"\x00"
    groups = []
    while n:
        groups.append(n & 0x7F)
        n >>= 7
    raw = bytearray(g | 0x80 for g in groups)
    raw[-1] &= 0x7F
    return bytes(raw)


def point_at(waypoints, t_ms: int):
    """Linear interpolation along a 4D waypoint list; None outside its span."""
    if t_ms < waypoints[0].eta_ms or t_ms > waypoints[-1].eta_ms:
        return None
    for a, b in zip(waypoints, waypoints[1:]):
        if a.eta_ms <= t_ms <= b.eta_ms:
            span = b.eta_ms - a.eta_ms
            f = 0.0 if span == 0 else (t_ms - a.eta_ms) / span
            return (a.east_m + f * (b.east_m - a.east_m),
                    a.north_m + f * (b.north_m - a.north_m),
                    a.up_m + f * (b.up_m - a.up_m))
    return None


def conflict_oracle(plan_a, plan_b, sep_h_m: float, sep_v_m: float,
                    sep_t_ms: int, step_ms: int = 100) -> bool:
    """Brute force: every sample of A against every sample of B.

    Each plan is sampled on its own lattice {start + k*step}. A pair is in
    conflict when horizontal AND vertical AND temporal separations are all
    inside the minima at once.
    """
    wps_a, wps_b = plan_a.waypoints, plan_b.waypoints
    times_a = range(wps_a[0].eta_ms, wps_a[-1].eta_ms + 1, step_ms)
    times_b = range(wps_b[0].eta_ms, wps_b[-1].eta_ms + 1, step_ms)
    samples_b = [(t, point_at(wps_b, t)) for t in times_b]
    for ta in times_a:
        pa = point_at(wps_a, ta)
        if pa is None:
            continue
        for tb, pb in samples_b:
            if pb is None or abs(ta - tb) > sep_t_ms:
                continue
            dh = math.hypot(pa[0] - pb[0], pa[1] - pb[1])
            dv = abs(pa[2] - pb[2])
            if dh <= sep_h_m and dv <= sep_v_m:
                return True
    return False


def point_in_polygon(x: float, y: float, polygon) -> bool:
    """Ray casting, crossings counted to the right of the point."""
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > x:
                inside = not inside
    return inside


def schedule_overlaps(slots) -> list[tuple]:
    """All pairs of blocking slots on the same pad whose windows intersect.

    A slot blocks while Reserved or InProgress. Touching endpoints do not
    count as overlap (a slot may start the instant another ends).
    """
    blocking = [s for s in slots if s.state.name in ("RESERVED", "IN_PROGRESS")]
    bad = []
    for i, a in enumerate(blocking):
        for b in blocking[i + 1:]:
            if a.pad != b.pad:
                continue
            if a.start_ms < b.end_ms and b.start_ms < a.end_ms:
                bad.append((a, b))
    return bad


def distance_point_to_segment(px, py, ax, ay, bx, by) -> float:
    """Plain 2D point-to-segment distance."""
    dx, dy = bx - ax, by - ay
    seg_len_sq = dx * dx + dy * dy
    if seg_len_sq == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg_len_sq))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def distance_to_polygon(x: float, y: float, polygon) -> float:
    """0 inside, else the distance to the nearest edge."""
    if point_in_polygon(x, y, polygon):
        return 0.0
    return min(distance_point_to_segment(x, y, x1, y1, x2, y2)
               for (x1, y1), (x2, y2) in
               zip(polygon, list(polygon[1:]) + [polygon[0]]))


def lattice_shortest_length(geofences, origin, dest, clearance_m: float,
                            margin_cells: int = 10) -> float | None:
    """Dijkstra over a 1 m 8-connected lattice anchored on the origin.

    A cell is blocked when it sits within the clearance of any polygon.
    Diagonal steps may not cut past a blocked corner. Returns the shortest
    path length, or None when the goal is unreachable.
    """
    import heapq

    xs = [origin[0], dest[0]] + [x for f in geofences for x, _ in f]
    ys = [origin[1], dest[1]] + [y for f in geofences for _, y in f]
    x_lo = math.floor(min(xs) - clearance_m) - margin_cells
    x_hi = math.ceil(max(xs) + clearance_m) + margin_cells
    y_lo = math.floor(min(ys) - clearance_m) - margin_cells
    y_hi = math.ceil(max(ys) + clearance_m) + margin_cells

    def blocked(cx: float, cy: float) -> bool:
        return any(distance_to_polygon(cx, cy, fence) <= clearance_m
                   for fence in geofences)

    start = (0, 0)
    goal = (round(dest[0] - origin[0]), round(dest[1] - origin[1]))
    free: dict[tuple, bool] = {start: True, goal: True}

    def is_free(cell) -> bool:
        if cell not in free:
            cx, cy = origin[0] + cell[0], origin[1] + cell[1]
            free[cell] = (x_lo <= cx <= x_hi and y_lo <= cy <= y_hi
                          and not blocked(cx, cy))
        return free[cell]

    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if d > dist.get(cell, math.inf):
            continue
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nxt = (cell[0] + dx, cell[1] + dy)
                if not is_free(nxt):
                    continue
                if dx and dy and not (is_free((cell[0] + dx, cell[1]))
                                      and is_free((cell[0], cell[1] + dy))):
                    continue
                nd = d + math.hypot(dx, dy)
                if nd < dist.get(nxt, math.inf):
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
    return None
