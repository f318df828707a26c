"""Ring-by-ring polygon-guided scanning of target points by a line formation.

The fleet flies as a line of ``m`` lanes, ``spacing`` apart, with lane 0 on
the outer boundary of the current ring.  A plan is built as a sequence of
formation snapshots (anchor of lane 0 plus the direction the line points);
every UAV flies straight between consecutive snapshots, so any formation in
between is a linear blend of two snapshots and adjacent lanes never drift
further than ``spacing`` apart.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .geometry import (
    EPS,
    ConvexPolygon,
    Point,
    add,
    as_point,
    convex_hull,
    dist,
    distance_to_boundary,
    inward_offset,
    left_normal,
    perimeter,
    polyline_length,
    project_onto_boundary,
    ring_membership,
    scale,
    segment_polygon_intersection,
    sub,
    unit,
)
from .model import DEFAULT_EPS_COV, FleetConfig, Instance, PlanReport, Trajectory, covered_mask, discretize

EPS_LINE = 1e-6
DEFAULT_DIRECTION = Point(0.0, 1.0)
MAX_TURN = math.pi / 4


@dataclass(frozen=True)
class RingRegion:
    index: int
    outer: ConvexPolygon
    inner: ConvexPolygon | None
    targets: tuple[Point, ...]
    entry: Point | None = None


@dataclass(frozen=True)
class ScanGroup:
    edge_index: int
    along: float
    members: tuple[tuple[Point, float], ...]
    excursion: float
    needs_formation: bool = False


@dataclass(frozen=True)
class Formation:
    anchor: Point
    direction: Point

    def lanes(self, m: int, spacing: float) -> list[Point]:
        return [add(self.anchor, scale(self.direction, j * spacing)) for j in range(m)]


@dataclass
class Plan:
    waypoints: list[list[Point]]
    report: PlanReport
    rings: list[RingRegion] = field(default_factory=list)
    groups: list[list[ScanGroup]] = field(default_factory=list)
    spacing: float = 0.0
    algo: str = "psa"
    eps_cov: float = DEFAULT_EPS_COV

    @property
    def m(self) -> int:
        return len(self.waypoints)

    def trajectories(self, fleet: FleetConfig) -> list[Trajectory]:
        return plan_trajectories(self.waypoints, fleet)

    def to_json(self) -> dict:
        return {
            "waypoints": [[[p.x, p.y] for p in wp] for wp in self.waypoints],
            "report": self.report.to_json(),
            "algo": self.algo,
            "spacing": self.spacing,
            "eps_cov": self.eps_cov,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Plan":
        wps = [[as_point(p) for p in wp] for wp in obj["waypoints"]]
        return cls(wps, PlanReport.from_json(obj["report"]), spacing=obj.get("spacing", 0.0),
                   algo=obj.get("algo", "psa"), eps_cov=obj.get("eps_cov", DEFAULT_EPS_COV))


def save_plan(plan: Plan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_json()) + "\n")


def load_plan(path) -> Plan:
    return Plan.from_json(json.loads(Path(path).read_text()))


def plan_trajectories(waypoints: Sequence[Sequence], fleet: FleetConfig) -> list[Trajectory]:
    """Slot a plan; formation plans (equal waypoint counts) stay in lockstep."""
    sync = len({len(w) for w in waypoints}) == 1
    return discretize(waypoints, fleet, synchronized=sync)


def _spacing(fleet: FleetConfig, spacing: float | None) -> float:
    s = fleet.w if spacing is None else float(spacing)
    if not (0 < s <= fleet.w):
        raise ValueError(f"lane spacing must be in (0, w={fleet.w}], got {s}")
    return s


# -- ring decomposition ------------------------------------------------------

def decompose_rings(targets: Iterable, fleet: FleetConfig, spacing: float | None = None) -> list[RingRegion]:
    s = _spacing(fleet, spacing)
    w_max = (fleet.m - 1) * s
    remaining = [as_point(p) for p in targets]
    if not remaining:
        raise ValueError("no targets")
    rings: list[RingRegion] = []
    while remaining:
        outer = convex_hull(remaining)
        if outer.degenerate:
            inner = None
        else:
            inner = inward_offset(outer, w_max) if w_max > 0 else outer
        here, rest = [], []
        for p in remaining:
            (here if ring_membership(p, outer, inner) else rest).append(p)
        if not here:  # pragma: no cover - hull vertices always belong to the ring
            raise RuntimeError("ring decomposition made no progress")
        rings.append(RingRegion(len(rings) + 1, outer, inner, tuple(here)))
        remaining = rest
    return rings


# -- scanning lines ------------------------------------------------------------

def excursion_for_depth(depth: float, w: float, eps_cov: float = DEFAULT_EPS_COV) -> float:
    """Inward shift of the formation until some lane reaches ``depth``."""
    r = math.fmod(depth, w)
    if r <= eps_cov or w - r <= eps_cov:
        return 0.0
    return r


def scan_groups(ring: RingRegion, w: float, eps_cov: float = DEFAULT_EPS_COV,
                eps_line: float = EPS_LINE) -> list[ScanGroup]:
    """Group ring targets sharing a scanning line; ``w`` is the lane spacing."""
    projs = []
    for p in ring.targets:
        if not ring_membership(p, ring.outer, ring.inner):
            raise ValueError(f"target {tuple(p)} is not inside ring {ring.index}")
        pr = project_onto_boundary(p, ring.outer)
        projs.append((pr.edge_index, pr.along, p, pr.depth))
    projs.sort(key=lambda r: (r[0], r[1], r[2]))
    groups: list[ScanGroup] = []
    cur: list = []

    def flush():
        if not cur:
            return
        members = tuple((p, d) for _, _, p, d in cur)
        exc = max(excursion_for_depth(d, w, eps_cov) for _, d in members)
        need = max(d for _, d in members) > eps_cov
        groups.append(ScanGroup(cur[0][0], cur[0][1], members, exc, need))

    for rec in projs:
        if cur and (rec[0] != cur[0][0] or rec[1] - cur[0][1] > eps_line):
            flush()
            cur = []
        cur.append(rec)
    flush()
    return groups


def _bisector(poly: ConvexPolygon, k: int) -> Point:
    """Inward bisector at vertex ``k`` (between edges k-1 and k)."""
    _, e_prev, _ = poly.edge_frame(k - 1)
    _, e_next, _ = poly.edge_frame(k)
    return unit(sub(e_next, e_prev))


def _entry_direction(outer: ConvexPolygon, entry: Point) -> Point:
    if outer.kind == "point":
        return DEFAULT_DIRECTION
    _, e, _ = outer.edge_frame(project_onto_boundary(entry, outer).edge_index)
    return left_normal(e)


def _ring_tour(ring: RingRegion, groups: Sequence[ScanGroup], entry: Point,
               direction: Point) -> tuple[list[Formation], float]:
    """Formation snapshots for one closed tour from ``entry`` back to it."""
    outer = ring.outer
    start = Formation(entry, direction)
    snaps = [start]

    def push(f: Formation):
        last = snaps[-1]
        if dist(last.anchor, f.anchor) <= EPS and dist(last.direction, f.direction) <= EPS:
            return
        snaps.append(f)

    if outer.kind == "point":
        return snaps, 0.0
    if outer.kind == "segment":
        a, b = outer.vertices
        for p in (b, a, entry):
            push(Formation(p, direction))
        return snaps, perimeter(outer)

    h = len(outer.vertices)
    pr = project_onto_boundary(entry, outer)
    i0, a0 = pr.edge_index, pr.along
    if a0 >= outer.edge_frame(i0)[2] - EPS:
        i0, a0 = (i0 + 1) % h, 0.0
    by_edge: dict[int, list[ScanGroup]] = {}
    for g in groups:
        if g.needs_formation:
            by_edge.setdefault(g.edge_index, []).append(g)
    for lst in by_edge.values():
        lst.sort(key=lambda g: g.along)

    def visit(edge: int, lo: float, hi: float):
        o, e, _ = outer.edge_frame(edge)
        n = left_normal(e)
        for g in by_edge.get(edge, []):
            if lo - EPS <= g.along < hi - EPS:
                foot = add(o, scale(e, g.along))
                push(Formation(foot, n))
                if g.excursion > 0:
                    push(Formation(add(foot, scale(n, g.excursion)), n))
                    push(Formation(foot, n))

    for k in range(h):
        edge = (i0 + k) % h
        visit(edge, a0 if k == 0 else 0.0, math.inf)
        v = (edge + 1) % h
        if dist(outer.vertices[v], entry) > EPS:
            push(Formation(outer.vertices[v], _bisector(outer, v)))
    visit(i0, 0.0, a0)
    push(start)
    cost = perimeter(outer) + sum(2 * g.excursion for g in groups)
    return snaps, cost


def psta_scan(ring: RingRegion, fleet: FleetConfig, spacing: float | None = None,
              eps_cov: float = DEFAULT_EPS_COV, direction: Point | None = None,
              groups: Sequence[ScanGroup] | None = None) -> tuple[list[list[Point]], float]:
    """Waypoints of every UAV for one ring, plus that ring's cost L_k."""
    s = _spacing(fleet, spacing)
    entry = ring.entry
    if entry is None:
        entry = distance_to_boundary(_centroid(ring.targets), ring.outer)[1]
    if direction is None:
        direction = _entry_direction(ring.outer, entry)
    if groups is None:
        groups = scan_groups(ring, s, eps_cov)
    snaps, cost = _ring_tour(ring, groups, entry, direction)
    return _waypoints(_refine(snaps), fleet.m, s), cost


def _centroid(pts: Sequence[Point]) -> Point:
    return Point(sum(p.x for p in pts) / len(pts), sum(p.y for p in pts) / len(pts))


def transfer_path(rings: Sequence[RingRegion]) -> tuple[list[Point], float]:
    """Entry points c_1..c_K on a single straight transfer line, and its length."""
    if not rings:
        raise ValueError("no rings")
    first, last = rings[0], rings[-1]
    if len(rings) == 1:
        c = distance_to_boundary(_centroid(first.targets), first.outer)[1]
        return [c], 0.0
    best = None
    for v in last.outer.vertices:
        d, q = distance_to_boundary(v, first.outer)
        if best is None or d < best[0] - EPS:
            best = (d, q, v)
    d, c1, v_star = best
    entries = [c1]
    for ring in rings[1:-1]:
        hits = segment_polygon_intersection(c1, v_star, ring.outer)
        if not hits:  # pragma: no cover - nesting guarantees a crossing
            raise RuntimeError(f"transfer line misses ring {ring.index}")
        entries.append(hits[0])
    entries.append(v_star)
    return entries, d


def _refine(snaps: Sequence[Formation], max_turn: float = MAX_TURN) -> list[Formation]:
    """Split legs that swing the line by more than ``max_turn`` radians.

    The anchor still moves on the same straight leg while the direction turns
    in even angular steps, so lane 0 is unchanged and adjacent lanes never
    come closer than ``spacing * cos(max_turn / 2)``.
    """
    if not snaps:
        return []
    out = [snaps[0]]
    for f in snaps[1:]:
        prev = out[-1]
        a0 = math.atan2(prev.direction.y, prev.direction.x)
        turn = math.atan2(f.direction.y, f.direction.x) - a0
        turn = (turn + math.pi) % (2 * math.pi) - math.pi
        pieces = math.ceil(abs(turn) / max_turn - 1e-12)
        for i in range(1, pieces):
            lam = i / pieces
            ang = a0 + turn * lam
            anchor = Point(prev.anchor.x + (f.anchor.x - prev.anchor.x) * lam,
                           prev.anchor.y + (f.anchor.y - prev.anchor.y) * lam)
            out.append(Formation(anchor, Point(math.cos(ang), math.sin(ang))))
        out.append(f)
    return out


def _waypoints(snaps: Sequence[Formation], m: int, spacing: float) -> list[list[Point]]:
    lanes = [f.lanes(m, spacing) for f in snaps]
    return [[lane[j] for lane in lanes] for j in range(m)]


def _build_psa(targets: Sequence[Point], fleet: FleetConfig, s: float, eps_cov: float,
               orientation: Point | None = None) -> tuple[list[Formation], PlanReport,
                                                          list[RingRegion], list[list[ScanGroup]]]:
    rings = decompose_rings(targets, fleet, s)
    entries, l_trans = transfer_path(rings)
    rings = [replace(r, entry=c) for r, c in zip(rings, entries)]
    if len(rings) > 1:
        t = unit(sub(entries[-1], entries[0]))
        dirs = [t] * len(rings)
    else:
        d0 = _entry_direction(rings[0].outer, entries[0])
        if rings[0].outer.kind == "point" and orientation is not None:
            d0 = orientation
        dirs = [d0]
    snaps: list[Formation] = []
    groups_all, bounds, adjust = [], [], 0.0
    for ring, d in zip(rings, dirs):
        groups = scan_groups(ring, s, eps_cov)
        tour, _ = _ring_tour(ring, groups, ring.entry, d)
        if snaps and dist(snaps[-1].anchor, tour[0].anchor) <= EPS and snaps[-1].direction == tour[0].direction:
            tour = tour[1:]
        snaps.extend(tour)
        groups_all.append(groups)
        bounds.append(perimeter(ring.outer))
        adjust += sum(2 * g.excursion for g in groups)
    snaps = _refine(snaps)
    report = PlanReport(per_uav_distance=[], fleet_cost=0.0, rounds=len(rings),
                        per_round_boundary=bounds, transfer=l_trans, adjust=adjust,
                        lower_bound=sum(bounds) + l_trans)
    return snaps, report, rings, groups_all


def _finish(waypoints: list[list[Point]], report: PlanReport) -> PlanReport:
    report.per_uav_distance = [polyline_length(w) for w in waypoints]
    report.fleet_cost = max(report.per_uav_distance)
    return report


def psa_plan(inst: Instance, spacing: float | None = None, eps_cov: float = DEFAULT_EPS_COV) -> Plan:
    """Plan the whole mission ring by ring.

    ``spacing`` below ``w`` leaves a connectivity margin for noisy flight at
    the price of a narrower ring.
    """
    s = _spacing(inst.fleet, spacing)
    snaps, report, rings, groups = _build_psa(inst.targets, inst.fleet, s, eps_cov)
    wps = _waypoints(snaps, inst.fleet.m, s)
    return Plan(wps, _finish(wps, report), rings, groups, s, "psa", eps_cov)


def lower_bound(plan: Plan) -> float:
    if plan.rings:
        return sum(perimeter(r.outer) for r in plan.rings) + plan.report.transfer
    return plan.report.lower_bound


def instance_lower_bound(inst: Instance, spacing: float | None = None) -> float:
    rings = decompose_rings(inst.targets, inst.fleet, spacing)
    _, l_trans = transfer_path(rings)
    return sum(perimeter(r.outer) for r in rings) + l_trans


def replan(inst: Instance, visited: Iterable, fleet_positions: Sequence, spacing: float | None = None,
           eps_cov: float = DEFAULT_EPS_COV) -> Plan:
    """Fresh plan over the unvisited targets, flown from where the fleet is now."""
    s = _spacing(inst.fleet, spacing)
    seen = {as_point(p) for p in visited}
    todo = [p for p in inst.targets if p not in seen]
    if not todo:
        raise ValueError("nothing to plan")
    pos = [as_point(p) for p in fleet_positions]
    if len(pos) != inst.fleet.m:
        raise ValueError(f"expected {inst.fleet.m} fleet positions, got {len(pos)}")
    orient = None
    if len(pos) > 1 and dist(pos[0], pos[1]) > EPS:
        orient = unit(sub(pos[1], pos[0]))
    snaps, report, rings, groups = _build_psa(todo, inst.fleet, s, eps_cov, orient)
    wps = _waypoints(snaps, inst.fleet.m, s)
    if any(dist(p, w[0]) > EPS for p, w in zip(pos, wps)):
        report.transfer += dist(pos[0], wps[0][0])
        report.lower_bound += dist(pos[0], wps[0][0])
        wps = [[p] + w for p, w in zip(pos, wps)]
    return Plan(wps, _finish(wps, report), rings, groups, s, "psa", eps_cov)


def greedy_plan(inst: Instance, spacing: float | None = None, eps_cov: float = DEFAULT_EPS_COV,
                start: Point | None = None) -> Plan:
    """Nearest-target-first baseline with a rigid vertical line formation."""
    s = _spacing(inst.fleet, spacing)
    m = inst.fleet.m
    targets = list(inst.targets)
    offsets = [Point(0.0, j * s) for j in range(m)]
    base = as_point(start) if start is not None else min(targets)
    visited = covered_mask([[add(base, o)] for o in offsets], targets, eps_cov)
    bases = [base]
    while not visited.all():
        lanes = [add(base, o) for o in offsets]
        best = None
        for i, p in enumerate(targets):
            if visited[i]:
                continue
            d = min(dist(q, p) for q in lanes)
            if best is None or d < best[0]:
                best = (d, i)
        p = targets[best[1]]
        j = min(range(m), key=lambda k: (dist(lanes[k], p), k))
        nxt = add(base, sub(p, lanes[j]))
        visited |= covered_mask([[add(base, o), add(nxt, o)] for o in offsets], targets, eps_cov)
        visited[best[1]] = True
        base = nxt
        bases.append(base)
    wps = [[add(b, o) for b in bases] for o in offsets]
    report = PlanReport(per_uav_distance=[], fleet_cost=0.0,
                        lower_bound=instance_lower_bound(inst, s))
    return Plan(wps, _finish(wps, report), spacing=s, algo="greedy", eps_cov=eps_cov)
