"""Independent reference computations shared by the tests."""
import math
from itertools import combinations

import numpy as np

from fleetscan.model import FleetConfig, generate_instance


def field_instance(seed, n=30, m=3, side=120.0, w=10.0, speed=4.0):
    return generate_instance(side, side, n, FleetConfig(m, w, speed, speed), seed)


def bench_instance(seed, n=20, m=4, side=400.0, w=10.0):
    return generate_instance(side, side, n, FleetConfig(m, w, 4.0), seed)


def point_in_convex(p, verts, tol=1e-9):
    """Ray-casting containment with an on-boundary allowance."""
    x, y = p
    n = len(verts)
    for i in range(n):
        (ax, ay), (bx, by) = verts[i], verts[(i + 1) % n]
        seg = math.hypot(bx - ax, by - ay)
        if seg > 0:
            t = max(0.0, min(1.0, ((x - ax) * (bx - ax) + (y - ay) * (by - ay)) / seg**2))
            if math.hypot(ax + t * (bx - ax) - x, ay + t * (by - ay) - y) <= tol:
                return True
    inside = False
    for i in range(n):
        (ax, ay), (bx, by) = verts[i], verts[(i + 1) % n]
        if (ay > y) != (by > y):
            xc = ax + (y - ay) * (bx - ax) / (by - ay)
            if xc > x:
                inside = not inside
    return inside


def polyline_len(pts):
    a = np.asarray(pts, float)
    return float(np.linalg.norm(np.diff(a, axis=0), axis=1).sum()) if len(a) > 1 else 0.0


def _in_closed_triangle(p, a, b, c):
    """Exact for integer inputs; degenerate triangles act as segments."""
    def cr(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    if cr(a, b, c) == 0:
        pts = sorted({a, b, c})
        lo, hi = pts[0], pts[-1]
        return (cr(lo, hi, p) == 0 and min(lo[0], hi[0]) <= p[0] <= max(lo[0], hi[0])
                and min(lo[1], hi[1]) <= p[1] <= max(lo[1], hi[1]))
    s1, s2, s3 = cr(a, b, p), cr(b, c, p), cr(c, a, p)
    return (s1 >= 0 and s2 >= 0 and s3 >= 0) or (s1 <= 0 and s2 <= 0 and s3 <= 0)


def brute_hull_vertices(points):
    """Extreme points: those not inside any closed (possibly flat) triangle of others."""
    pts = sorted(set(map(tuple, points)))
    out = set()
    for p in pts:
        others = [q for q in pts if q != p]
        tris = list(combinations(others, 3)) + [(a, a, b) for a, b in combinations(others, 2)]
        if not any(_in_closed_triangle(p, *t) for t in tris):
            out.add(p)
    return out


def sweep_excursion(depths_mm, w_mm, eps_mm, lanes=64):
    """Smallest inward shift (mm) at which every depth has been swept by a lane.

    The formation moves inward in 1 mm steps; lane j sits at a + j*w.  Depths
    within eps of a lane at a = 0 count as covered during the boundary pass.
    """
    d = np.asarray(depths_mm, dtype=np.int64)
    lane = np.arange(lanes, dtype=np.int64) * w_mm
    done = (np.abs(d[:, None] - lane[None, :]) <= eps_mm).any(axis=1)
    a = 0
    while not done.all():
        a += 1
        if a > w_mm:
            raise AssertionError("sweep never finished")
        done |= ((d[:, None] - a - lane[None, :]) == 0).any(axis=1)
    return a


def gauss_solve(A, b):
    """Textbook Gaussian elimination with partial pivoting."""
    A = [list(map(float, row)) for row in A]
    b = list(map(float, b))
    n = len(A)
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(A[i][k]))
        A[k], A[piv] = A[piv], A[k]
        b[k], b[piv] = b[piv], b[k]
        for i in range(k + 1, n):
            f = A[i][k] / A[k][k]
            for j in range(k, n):
                A[i][j] -= f * A[k][j]
            b[i] -= f * b[k]
    x = [0.0] * n
    for i in reversed(range(n)):
        x[i] = (b[i] - sum(A[i][j] * x[j] for j in range(i + 1, n))) / A[i][i]
    return np.array(x)


def winding_number(p, verts):
    wn = 0
    x, y = p
    n = len(verts)
    for i in range(n):
        (ax, ay), (bx, by) = verts[i], verts[(i + 1) % n]
        side = (bx - ax) * (y - ay) - (x - ax) * (by - ay)
        if ay <= y < by and side > 0:
            wn += 1
        elif by <= y < ay and side < 0:
            wn -= 1
    return wn


def fine_min_distance(p, q, u, v, horizon, steps=20000):
    """Minimum separation of two straight-line movers sampled on a fine grid."""
    t = np.linspace(0.0, horizon, steps + 1)
    a = np.asarray(p) + np.outer(t, u)
    b = np.asarray(q) + np.outer(t, v)
    return float(np.linalg.norm(a - b, axis=1).min())


def check_barrier_log(n_agents, log):
    """Safety and exactly-once over (kind, agent, step) tuples in delivery order."""
    reported = {}
    released = {}
    for kind, agent, step in log:
        if kind == "report":
            reported.setdefault(step, set()).add(agent)
        else:
            assert reported.get(step, set()) == set(range(n_agents)), f"early release of step {step}"
            released.setdefault(step, []).append(agent)
    for step, agents in released.items():
        assert sorted(agents) == list(range(n_agents)), f"step {step} released {agents}"
    return released


# -- protocol generators ------------------------------------------------------------

def _rnum(rng, lo=-1e4, hi=1e4):
    return rng.choice([rng.uniform(lo, hi), float(rng.randint(int(lo), int(hi))), rng.randint(0, 50), 0.0])


def random_action(rng, conn=None, sync=None):
    from fleetscan.protocol import ACTION_KINDS
    kind = rng.choice(ACTION_KINDS)
    a = {"kind": kind, "connection_id": rng.randint(0, 9) if conn is None else conn}
    s = rng.random() < 0.5 if sync is None else sync
    if s or rng.random() < 0.5:
        a["sync"] = s
    if kind == "goto":
        key = rng.choice(["relative_distance", "absolute_destination"])
        a[key] = [_rnum(rng), _rnum(rng)]
    if rng.random() < 0.4:
        a["duration"] = abs(_rnum(rng))
    return a


def random_body(rng, ptype):
    from fleetscan.protocol import EXCEPTION_KINDS, PRIORITIES
    if ptype == 0:
        return {}
    if ptype == 1:
        return {"connection_id": rng.randint(0, 10**6)}
    if ptype == 2:
        b = {"connection_id": rng.randint(0, 99), "pos": [_rnum(rng), _rnum(rng)],
             "vel": [_rnum(rng, -20, 20), _rnum(rng, -20, 20)], "battery": rng.random(),
             "t": abs(_rnum(rng)), "d": abs(_rnum(rng)), "step": rng.randint(-1, 500)}
        if rng.random() < 0.3:
            b["exception"] = rng.choice(EXCEPTION_KINDS)
        if rng.random() < 0.3:
            b["energy"] = abs(_rnum(rng, 0, 3e5))
        return b
    if ptype == 3:
        return {"center": [_rnum(rng), _rnum(rng)], "radius": rng.uniform(0.1, 1e4)}
    if ptype == 4:
        acts = [random_action(rng, sync=False) for _ in range(rng.randint(0, 3))]
        acts.append(random_action(rng))
        b = {"step": rng.randint(0, 500), "actions": acts}
        if rng.random() < 0.3:
            b["priority"] = rng.choice(PRIORITIES)
        if rng.random() < 0.2:
            b["replace"] = rng.random() < 0.5
        return b
    if ptype == 5:
        b = {"phase": rng.choice(["done", "release"]), "step": rng.randint(0, 500)}
        if rng.random() < 0.5:
            b["connection_id"] = rng.randint(0, 99)
        return b
    b = {}
    if rng.random() < 0.5:
        b["reason"] = rng.choice(["", "mission complete", "lost link", "ünïcode ✓"])
    return b


def random_packet(rng):
    from fleetscan.protocol import Packet
    ptype = rng.randint(0, 6)
    return Packet(ptype, random_body(rng, ptype))


def malformed_lines(rng, line: bytes):
    """Mutations of a valid encoded line that must all be rejected."""
    import json
    obj = json.loads(line)
    out = [line[:-1], line + line, line[: rng.randint(1, len(line) - 2)] + b"\n", b"\n", b"[1,2]\n",
           b"\xff\xfe\n"]
    for bad_type in (99, -1, "2", 1.0, True, None):
        out.append(json.dumps({"type": bad_type, "body": obj["body"]}).encode() + b"\n")
    out.append(json.dumps({"type": obj["type"], "body": obj["body"], "extra": 1}).encode() + b"\n")
    out.append(json.dumps({"type": obj["type"]}).encode() + b"\n")
    body = obj["body"]
    out.append(json.dumps({"type": obj["type"], "body": dict(body, bogus=0)}).encode() + b"\n")
    for k in body:
        out.append(json.dumps({"type": obj["type"], "body": dict(body, **{k: {"x": None}})}).encode() + b"\n")
    required = {1: ["connection_id"], 2: ["pos", "step", "battery"], 3: ["center", "radius"],
                4: ["step", "actions"], 5: ["phase", "step"]}.get(obj["type"], [])
    for k in required:
        out.append(json.dumps({"type": obj["type"], "body": {a: v for a, v in body.items() if a != k}}).encode()
                   + b"\n")
    if "pos" in body:
        out.append(line.replace(b'"pos":[', b'"pos":[NaN,', 1))
    return out


def run_barrier_schedule(n_agents, n_steps, order, duplicates=()):
    """Drive a barrier with agents acting in ``order`` (a sequence of agent ids).

    An agent whose turn comes while it still waits for a release keeps the
    turn buffered and acts as soon as its release arrives.  ``duplicates`` is a
    set of positions in ``order`` after which the acting agent re-sends its
    last report.  Returns the (kind, agent, step) delivery log.
    """
    from fleetscan.protocol import SyncBarrier
    bar = SyncBarrier(range(n_agents))
    next_step = [0] * n_agents
    waiting = [False] * n_agents
    owed = [0] * n_agents
    log = []

    def act(a, pos):
        s = next_step[a]
        log.append(("report", a, s))
        rel = bar.on_sync(a, s)
        waiting[a] = True
        next_step[a] += 1
        if pos in duplicates:
            assert bar.on_sync(a, s) == []
        for b, p in rel:
            assert p.body == {"phase": "release", "step": s}
            log.append(("release", b, s))
            waiting[b] = False
        for b in range(n_agents):
            while owed[b] and not waiting[b] and next_step[b] < n_steps:
                owed[b] -= 1
                act(b, -1)

    for pos, a in enumerate(order):
        if next_step[a] >= n_steps:
            continue
        if waiting[a]:
            owed[a] += 1
        else:
            act(a, pos)
    return log, bar


def mid_leg_kick(trace, uav, size):
    """A displacement of ``size`` meters, perpendicular to the UAV's motion, in the
    middle of the longest synchronized leg of a clean run."""
    rel = [0.0] + [r["t"] for r in trace.events("release")]
    i = max(range(len(rel) - 1), key=lambda k: rel[k + 1] - rel[k])
    t = round((rel[i] + rel[i + 1]) / 2 - 2.0, 1)
    pos = {r["t"]: r["pos"] for r in trace.records if r["kind"] == "state" and r["uav"] == uav}
    tt = math.floor(t)
    a, b = pos[float(max(tt - 1, 1))], pos[float(tt)]
    dx, dy = b[0] - a[0], b[1] - a[1]
    n = math.hypot(dx, dy)
    return (t, uav, (-dy / n * size, dx / n * size))


def distance_to_polyline(p, pts):
    best = math.inf
    for a, b in zip(pts, pts[1:]):
        ab = (b[0] - a[0], b[1] - a[1])
        L2 = ab[0] ** 2 + ab[1] ** 2
        t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / L2))
        best = min(best, math.hypot(a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]))
    return best if len(pts) > 1 else math.dist(p, pts[0])
