"""Planar geometry for convex regions.

Polygons are convex and stored counter-clockwise.  A hull of a single point or
of collinear points is kept as a degenerate polygon (1 or 2 vertices) instead
of being rejected, since the planner has to traverse those too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

EPS = 1e-9


class Point(NamedTuple):
    x: float
    y: float


def as_point(p) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite coordinate {p!r}")
    return Point(x, y)


def sub(a, b) -> Point:
    return Point(a[0] - b[0], a[1] - b[1])


def add(a, b) -> Point:
    return Point(a[0] + b[0], a[1] + b[1])


def scale(a, k: float) -> Point:
    return Point(a[0] * k, a[1] * k)


def dot(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def norm(a) -> float:
    return math.hypot(a[0], a[1])


def dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def unit(a) -> Point:
    n = norm(a)
    if n == 0.0:
        raise ValueError("zero-length vector has no direction")
    return Point(a[0] / n, a[1] / n)


def left_normal(d) -> Point:
    return Point(-d[1], d[0])


def lerp(a, b, t: float) -> Point:
    return Point(a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)


def polyline_length(pts: Sequence) -> float:
    return sum(dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1))


def closest_on_segment(p, a, b) -> tuple[Point, float]:
    """Closest point to ``p`` on segment ab and its parameter in [0, 1]."""
    d = sub(b, a)
    L2 = dot(d, d)
    if L2 == 0.0:
        return Point(a[0], a[1]), 0.0
    t = min(1.0, max(0.0, dot(sub(p, a), d) / L2))
    return lerp(a, b, t), t


def segment_distance(p, a, b) -> float:
    q, _ = closest_on_segment(p, a, b)
    return dist(p, q)


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: tuple[Point, ...]

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("polygon needs at least one vertex")

    @property
    def kind(self) -> str:
        return {1: "point", 2: "segment"}.get(len(self.vertices), "polygon")

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3

    def __len__(self):
        return len(self.vertices)

    def edge(self, i: int) -> tuple[Point, Point]:
        v = self.vertices
        return v[i % len(v)], v[(i + 1) % len(v)]

    def edges(self) -> list[tuple[Point, Point]]:
        if len(self.vertices) == 1:
            return []
        return [self.edge(i) for i in range(len(self.vertices))]

    def edge_frame(self, i: int) -> tuple[Point, Point, float]:
        """Origin, unit direction and length of edge ``i``.

        The inward normal of a CCW polygon is ``left_normal(direction)``.
        """
        a, b = self.edge(i)
        return a, unit(sub(b, a)), dist(a, b)

    def area(self) -> float:
        v = self.vertices
        return 0.5 * sum(cross(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))

    def centroid(self) -> Point:
        xs = [p.x for p in self.vertices]
        ys = [p.y for p in self.vertices]
        return Point(sum(xs) / len(xs), sum(ys) / len(ys))


@dataclass(frozen=True)
class EdgeProjection:
    edge_index: int
    along: float
    depth: float
    corner: bool = False


def _dedupe(points: Iterable[Point]) -> list[Point]:
    pts = sorted(set(points))
    out: list[Point] = []
    for p in pts:
        # a near twin can sit a few entries back when x ties within EPS
        k = len(out) - 1
        while k >= 0 and p.x - out[k].x <= EPS:
            if dist(out[k], p) <= EPS:
                break
            k -= 1
        else:
            out.append(p)
    return out


def _turn(o, a, b) -> float:
    """Cross product scaled to a perpendicular offset (meters)."""
    c = cross(sub(a, o), sub(b, o))
    span = max(dist(o, a), dist(o, b))
    return c / span if span > 0 else 0.0


def convex_hull(points: Iterable) -> ConvexPolygon:
    """Hull of a finite point set via the monotone-chain form of Graham's scan.

    Collinear boundary points are dropped, so the result keeps only strictly
    convex vertices.  Collinear input gives a two-vertex segment polygon.
    """
    pts = _dedupe(as_point(p) for p in points)
    if not pts:
        raise ValueError("empty point set")
    if len(pts) == 1:
        return ConvexPolygon((pts[0],))

    def chain(seq):
        out: list[Point] = []
        for p in seq:
            while len(out) >= 2 and cross(sub(out[-1], out[-2]), sub(p, out[-2])) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    # the exact chain keeps slivers; drop vertices that bend by less than EPS
    changed = True
    while changed and len(hull) >= 3:
        changed = False
        for i in range(len(hull)):
            if _turn(hull[i - 1], hull[i], hull[(i + 1) % len(hull)]) <= EPS:
                del hull[i]
                changed = True
                break
    if len(hull) <= 2:
        # collinear within EPS: keep the two extremes along the line, which for a
        # nearly vertical set need not be the lexicographic first and last
        b = max(pts, key=lambda p: dist(pts[0], p))
        a = max(pts, key=lambda p: dist(b, p))
        return ConvexPolygon(tuple(sorted((a, b))))
    return ConvexPolygon(tuple(hull))


def perimeter(poly: ConvexPolygon) -> float:
    """Closed-tour length; a segment counts twice (out and back)."""
    v = poly.vertices
    if len(v) == 1:
        return 0.0
    if len(v) == 2:
        return 2.0 * dist(v[0], v[1])
    return sum(dist(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))


def edge_depths(p, poly: ConvexPolygon) -> list[float]:
    """Signed distance from ``p`` to every edge line, positive inside."""
    out = []
    for i in range(len(poly.vertices)):
        o, d, _ = poly.edge_frame(i)
        out.append(cross(d, sub(p, o)))
    return out


def contains(poly: ConvexPolygon, p, tol: float = EPS) -> bool:
    """Inside-or-on test."""
    p = as_point(p)
    if poly.kind == "point":
        return dist(p, poly.vertices[0]) <= tol
    if poly.kind == "segment":
        return segment_distance(p, *poly.vertices) <= tol
    return min(edge_depths(p, poly)) >= -tol


def strictly_inside(poly: ConvexPolygon, p, tol: float = EPS) -> bool:
    if poly.degenerate:
        return False
    return min(edge_depths(as_point(p), poly)) > tol


def _clip(vertices: list[Point], origin, normal, offset: float) -> list[Point]:
    """Keep the part of a polygon where ``normal . (x - origin) >= offset``."""
    out: list[Point] = []
    n = len(vertices)
    for i in range(n):
        cur, nxt = vertices[i], vertices[(i + 1) % n]
        dc = dot(normal, sub(cur, origin)) - offset
        dn = dot(normal, sub(nxt, origin)) - offset
        if dc >= 0:
            out.append(cur)
        if (dc >= 0) != (dn >= 0):
            out.append(lerp(cur, nxt, dc / (dc - dn)))
    return out


def _clean(vertices: list[Point]) -> list[Point]:
    out: list[Point] = []
    for p in vertices:
        if out and dist(out[-1], p) <= EPS:
            continue
        out.append(p)
    while len(out) > 1 and dist(out[0], out[-1]) <= EPS:
        out.pop()
    changed = True
    while changed and len(out) >= 3:
        changed = False
        for i in range(len(out)):
            if _turn(out[i - 1], out[i], out[(i + 1) % len(out)]) <= EPS:
                del out[i]
                changed = True
                break
    return out


def inward_offset(poly: ConvexPolygon, d: float) -> ConvexPolygon | None:
    """Intersection of the edge half-planes each pushed inward by ``d``.

    Returns ``None`` (empty) for degenerate input or once ``d`` reaches the
    inradius.
    """
    if poly.degenerate:
        return None
    if d < 0:
        raise ValueError("offset distance must be non-negative")
    if d == 0:
        return poly
    verts = list(poly.vertices)
    for i in range(len(poly.vertices)):
        o, e, _ = poly.edge_frame(i)
        verts = _clip(verts, o, left_normal(e), d)
        if not verts:
            return None
    verts = _clean(verts)
    if len(verts) < 3:
        return None
    out = ConvexPolygon(tuple(verts))
    if out.area() <= EPS:
        return None
    return out


def distance_to_boundary(p, poly: ConvexPolygon) -> tuple[float, Point]:
    p = as_point(p)
    v = poly.vertices
    if len(v) == 1:
        return dist(p, v[0]), v[0]
    best = (math.inf, v[0])
    for a, b in poly.edges():
        q, _ = closest_on_segment(p, a, b)
        dq = dist(p, q)
        if dq < best[0] - EPS:
            best = (dq, q)
    if best[0] <= EPS:
        return 0.0, best[1]
    return best


def project_onto_boundary(p, poly: ConvexPolygon) -> EdgeProjection:
    """Nearest edge (by perpendicular depth) and the coordinate along it."""
    p = as_point(p)
    if not contains(poly, p):
        raise ValueError(f"point {tuple(p)} lies outside the polygon")
    if poly.kind == "point":
        return EdgeProjection(0, 0.0, 0.0)
    if poly.kind == "segment":
        o, e, L = poly.edge_frame(0)
        return EdgeProjection(0, min(L, max(0.0, dot(sub(p, o), e))), 0.0)
    depths = edge_depths(p, poly)
    best = 0
    for i, dp in enumerate(depths):
        if dp < depths[best] - EPS:
            best = i
    o, e, L = poly.edge_frame(best)
    along = dot(sub(p, o), e)
    corner = along < -EPS or along > L + EPS
    return EdgeProjection(best, min(L, max(0.0, along)), max(0.0, depths[best]), corner)


def ring_membership(p, outer: ConvexPolygon, inner: ConvexPolygon | None) -> bool:
    if not contains(outer, p):
        return False
    if inner is None:
        return True
    return not strictly_inside(inner, p)


def segment_polygon_intersection(a, b, poly: ConvexPolygon) -> list[Point]:
    """Points where segment ab meets the polygon boundary, ordered from a."""
    a, b = as_point(a), as_point(b)
    d = sub(b, a)
    L2 = dot(d, d)
    params: list[float] = []
    if L2 == 0.0:
        return [a] if contains(poly, a) and distance_to_boundary(a, poly)[0] <= EPS else []
    if poly.kind == "point":
        q, t = closest_on_segment(poly.vertices[0], a, b)
        return [q] if dist(q, poly.vertices[0]) <= EPS else []
    for c0, c1 in poly.edges():
        f = sub(c1, c0)
        den = cross(d, f)
        w = sub(c0, a)
        if abs(den) <= EPS * math.sqrt(L2) * max(norm(f), EPS):
            # parallel; only collinear overlap contributes
            if abs(cross(w, d)) / math.sqrt(L2) > EPS:
                continue
            for c in (c0, c1):
                t = dot(sub(c, a), d) / L2
                if -EPS <= t <= 1 + EPS:
                    params.append(t)
            for t, q in ((0.0, a), (1.0, b)):
                if segment_distance(q, c0, c1) <= EPS:
                    params.append(t)
            continue
        t = cross(w, f) / den
        s = cross(w, d) / den
        if -EPS <= t <= 1 + EPS and -EPS <= s <= 1 + EPS:
            params.append(t)
    params.sort()
    out: list[Point] = []
    for t in params:
        q = lerp(a, b, min(1.0, max(0.0, t)))
        if out and dist(out[-1], q) <= 1e-7:
            continue
        out.append(q)
    if len(out) > 2:
        out = [out[0], out[-1]]
    return out
