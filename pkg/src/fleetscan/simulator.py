"""Deterministic discrete-time mission execution.

Every plan leg becomes one synchronized step: each UAV's goto carries the leg
duration of the slowest member, so the formation arrives together and the
barrier releases the next leg.  Agents and the flight monitor exchange real
encoded packets over an in-memory queue, and all randomness comes from one
seeded generator drawn in a fixed order.
"""
from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .energy import EnergyModels
from .geometry import Point, as_point, closest_on_segment, dist
from .model import LINK_TOL, Instance, covered_mask
from .planner import Plan, replan
from .protocol import (
    CLOSE,
    CONNECT_REQUEST,
    CONNECTION_ID,
    GEOFENCE,
    STATUS,
    SYNC,
    Action,
    Agent,
    AgentState,
    Command,
    Connect,
    ExceptionMonitor,
    GeoFence,
    Packet,
    ProtocolError,
    Receive,
    StatusTick,
    Step,
    SyncBarrier,
    ActionDone,
    decode,
    encode,
    task_packet,
)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    wind_sigma: float = 0.3
    gust: tuple | None = None          # (start_s, end_s, (vx, vy))
    gps_sigma: float = 1.0
    div_correct: float = 3.0
    div_replan: float = 10.0
    collide_dist: float = 2.0
    collide_horizon: float = 2.0
    seed: int = 0
    status_period: float = 1.0
    arrive_tol: float = 0.2
    xtrack_rate: float = 0.2           # lateral correction authority of the autopilot, m/s
    div_window: int = 5                # status reports whose median deviation is acted on
    kicks: tuple = ()                  # ((t_s, uav or -1 for all, (dx, dy)), ...)
    max_time: float | None = None
    battery_floor: float = 0.20
    link_timeout: float = 5.0
    pace_fraction: float = 0.95        # scheduled speed as a share of cruise

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.wind_sigma < 0 or self.gps_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not (self.div_correct < self.div_replan):
            raise ValueError("div_correct must be below div_replan")
        if not (0 < self.pace_fraction <= 1):
            raise ValueError("pace_fraction must be in (0, 1]")
        if self.div_window < 1:
            raise ValueError("div_window must be at least 1")

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        bad = set(obj) - known
        if bad:
            raise ValueError(f"unknown config field {sorted(bad)[0]!r}")
        kw = dict(obj)
        if kw.get("gust") is not None:
            s, e, v = kw["gust"]
            kw["gust"] = (float(s), float(e), (float(v[0]), float(v[1])))
        if "kicks" in kw:
            kw["kicks"] = tuple((float(t), int(u), (float(v[0]), float(v[1]))) for t, u, v in kw["kicks"])
        return cls(**kw)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class UavState:
    true_pos: Point
    reported_pos: Point
    velocity: tuple[float, float] = (0.0, 0.0)
    battery: float = 0.0
    cumulative_distance: float = 0.0
    cumulative_time: float = 0.0
    energy: float = 0.0


@dataclass
class MissionTrace:
    records: list[dict]
    positions: np.ndarray          # ticks x m x 2, true positions
    summary: dict
    energy_curves: list[list[tuple[float, float]]] = field(default_factory=list)
    final_battery: list[float] = field(default_factory=list)

    def to_ndjson(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)

    def summary_json(self) -> str:
        return json.dumps(self.summary, sort_keys=True, indent=1) + "\n"

    def events(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]


def _r(x: float) -> float:
    return round(float(x), 6)


def _pt(p) -> list[float]:
    return [_r(p[0]), _r(p[1])]


# -- monitors ---------------------------------------------------------------------------

def collision_warnings(pos: Sequence, vel: Sequence, collide_dist: float, horizon: float) -> list[tuple[int, int]]:
    """Pairs whose straight-line extrapolation comes closer than ``collide_dist``."""
    out = []
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            dp = (pos[j][0] - pos[i][0], pos[j][1] - pos[i][1])
            dv = (vel[j][0] - vel[i][0], vel[j][1] - vel[i][1])
            v2 = dv[0] * dv[0] + dv[1] * dv[1]
            t = 0.0 if v2 == 0 else min(horizon, max(0.0, -(dp[0] * dv[0] + dp[1] * dv[1]) / v2))
            if math.hypot(dp[0] + dv[0] * t, dp[1] + dv[1] * t) < collide_dist:
                out.append((i, j))
    return out


def energy_curve(times: Sequence[float], distances: Sequence[float], models: EnergyModels) -> list[float]:
    """Predicted cumulative energy at each sample, forced non-decreasing."""
    out, best = [], 0.0
    for t, d in zip(times, distances):
        best = max(best, float(models.predict(t, d)))
        out.append(best)
    return out


def default_fence(inst: Instance, margin: float = 10.0) -> GeoFence:
    c = (inst.width / 2, inst.height / 2)
    r = math.hypot(inst.width, inst.height) / 2 + (inst.fleet.m - 1) * inst.fleet.w + margin
    return GeoFence(c, r)


def plan_steps(waypoints: Sequence[Sequence[Point]], speed: float, start: int = 0):
    """One synchronized goto step per plan leg; zero-length legs are dropped.

    ``speed`` sets the leg durations; the simulator passes a fraction of
    cruise speed so UAVs have headroom to catch up after a disturbance.
    """
    m = len(waypoints)
    n = max(len(w) for w in waypoints)
    wps = [[as_point(p) for p in w] + [as_point(w[-1])] * (n - len(w)) for w in waypoints]
    legs = []
    for k in range(n - 1):
        lens = [dist(wps[j][k], wps[j][k + 1]) for j in range(m)]
        if max(lens) <= 1e-12:
            continue
        legs.append((k, max(lens) / speed))
    steps = [[] for _ in range(m)]
    segments = [dict() for _ in range(m)]
    for s, (k, dur) in enumerate(legs):
        for j in range(m):
            b = wps[j][k + 1]
            act = Action("goto", j, True, absolute_destination=(b.x, b.y), duration=dur)
            steps[j].append(Step(start + s, (act,)))
            segments[j][start + s] = (wps[j][k], b)
    return steps, segments


class FlightMonitor:
    """Ground-side services: handshake, barrier, exceptions, divergence, replanning."""

    def __init__(self, inst: Instance, plan: Plan, cfg: SimConfig, fence: GeoFence,
                 eps_cov: float = 0.5, replan_eps: float | None = None):
        self.inst, self.plan, self.cfg, self.fence = inst, plan, cfg, fence
        self.m = inst.fleet.m
        self.eps_cov = eps_cov
        self.replan_eps = min(eps_cov, plan.eps_cov) if replan_eps is None else replan_eps
        self.barrier = SyncBarrier()
        self.next_id = 0
        steps, self.segments = plan_steps(plan.waypoints, inst.fleet.cruise_speed * cfg.pace_fraction)
        self.initial_steps = steps
        self.next_step = len(steps[0]) if steps else 0
        self.exc = [ExceptionMonitor(fence, cfg.battery_floor, cfg.link_timeout) for _ in range(self.m)]
        self.windows = [deque(maxlen=cfg.div_window) for _ in range(self.m)]
        self.correcting = [False] * self.m
        self.replanning = False
        self.last_reported: list[Point] = [Point(*plan.waypoints[j][0]) for j in range(self.m)]
        self.last_contact = [0.0] * self.m
        self.visited = np.zeros(len(inst.targets), dtype=bool)
        self.visited |= covered_mask([[w[0]] for w in plan.waypoints], inst.targets, eps_cov)
        self.events: list[dict] = []
        self.home = [Point(*plan.waypoints[j][0]) for j in range(self.m)]

    def _event(self, t: float, kind: str, **kw) -> None:
        self.events.append({"t": _r(t), "kind": kind, **kw})

    def handle(self, j: int, p: Packet, t: float) -> list[tuple[int, Packet]]:
        self.last_contact[j] = t
        if p.ptype == CONNECT_REQUEST:
            cid = self.next_id
            self.next_id += 1
            self.barrier.register(cid)
            out = [(j, Packet(CONNECTION_ID, {"connection_id": cid})),
                   (j, Packet(GEOFENCE, {"center": list(self.fence.center), "radius": self.fence.radius}))]
            out += [(j, task_packet(s)) for s in self.initial_steps[j]]
            return out
        if p.ptype == SYNC:
            if p.body["phase"] != "done":
                raise ProtocolError("monitor received a release")
            out = self.barrier.on_sync(p.body.get("connection_id", j), p.body["step"])
            for kind, a, s in self.barrier.events:
                self._event(t, f"sync_{kind}", uav=a, step=s)
            self.barrier.events.clear()
            if out:
                s = p.body["step"]
                self._event(t, "release", step=s)
                legs = [[*self.segments[a][s]] for a in range(self.m) if s in self.segments[a]]
                self.visited |= covered_mask(legs, self.inst.targets, self.eps_cov)
            return out
        if p.ptype == STATUS:
            return self._status(j, p.body, t)
        if p.ptype == CLOSE:
            return []
        raise ProtocolError(f"monitor cannot handle packet type {p.ptype}")

    def _status(self, j: int, b: dict, t: float) -> list[tuple[int, Packet]]:
        pos = Point(*b["pos"])
        self.last_reported[j] = pos
        out = []
        for kind in self.exc[j].check(pos, b["battery"], t - self.last_contact[j]):
            self._event(t, "exception", uav=j, exception=kind)
            if kind in ("LowBattery", "GeoFenceBreach"):
                home = self.home[j]
                act = Action("return_home", j)
                out.append((j, task_packet(Step(self.next_step, (act,)), priority="high")))
                self.next_step += 1
                self._event(t, "return_home", uav=j, to=_pt(home))
        seg = self.segments[j].get(b["step"])
        if seg is None:
            return out
        q, _ = closest_on_segment(pos, *seg)
        self.windows[j].append(dist(pos, q))
        if len(self.windows[j]) < self.windows[j].maxlen:
            return out
        # a single GPS fix is too noisy; act on the median of a full window
        dev = float(np.median(self.windows[j]))
        if dev <= self.cfg.div_correct:
            self.correcting[j] = False
            return out
        if dev > self.cfg.div_replan and not self.replanning:
            out += self._replan(j, dev, t)
        elif not self.correcting[j] and not self.replanning:
            self.correcting[j] = True
            fix = closest_on_segment(pos, *seg)[0]
            act = Action("goto", j, absolute_destination=(fix.x, fix.y))
            out.append((j, task_packet(Step(self.next_step, (act,)), priority="insert")))
            self.next_step += 1
            self._event(t, "divergence", uav=j, deviation=_r(dev), action="correct", to=_pt(fix))
        return out

    def _replan(self, j: int, dev: float, t: float) -> list[tuple[int, Packet]]:
        seen = [p for p, v in zip(self.inst.targets, self.visited) if v]
        try:
            spacing = self.plan.spacing or None
            new = replan(self.inst, seen, self.last_reported, spacing=spacing, eps_cov=self.replan_eps)
        except ValueError as exc:
            self._event(t, "divergence", uav=j, deviation=_r(dev), action="replan_skipped", reason=str(exc))
            self.replanning = True
            return []
        self.replanning = True
        start = self.next_step
        steps, segs = plan_steps(new.waypoints, self.inst.fleet.cruise_speed * self.cfg.pace_fraction, start)
        for a in range(self.m):
            self.segments[a].update(segs[a])
            self.windows[a].clear()
            self.correcting[a] = False
        self.next_step = start + len(steps[0])
        self.barrier.restart(start)
        self._event(t, "divergence", uav=j, deviation=_r(dev), action="replan")
        self._event(t, "replan", start_step=start, steps=len(steps[0]),
                    unvisited=int((~self.visited).sum()), fleet_cost=_r(new.report.fleet_cost))
        out = []
        for a in range(self.m):
            for i, s in enumerate(steps[a]):
                out.append((a, task_packet(s, replace=(i == 0))))
        return out


# -- the run loop ---------------------------------------------------------------------------

class _Nav:
    """Per-UAV autopilot: follows the planned segment of the active step."""

    def __init__(self, home: Point):
        self.home = home
        self.mode = "hover"
        self.seg: tuple[Point, Point] | None = None
        self.pace = 0.0
        self.t0 = 0.0
        self.s0 = 0.0
        self.target: Point | None = None
        self.wait_left = 0.0
        self.saved: tuple | None = None


def run_mission(inst: Instance, plan: Plan, models: EnergyModels | None = None,
                config: SimConfig | None = None, eps_cov: float = 0.5,
                replan_eps: float | None = None) -> MissionTrace:
    cfg = config or SimConfig()
    m = inst.fleet.m
    if len(plan.waypoints) != m:
        raise ValueError(f"plan has {len(plan.waypoints)} UAVs but the fleet has {m}")
    fleet = inst.fleet
    rng = np.random.default_rng(cfg.seed)
    fence = default_fence(inst)
    mon = FlightMonitor(inst, plan, cfg, fence, eps_cov, replan_eps)
    agents = [Agent() for _ in range(m)]
    starts = [Point(*plan.waypoints[j][0]) for j in range(m)]
    states = [UavState(p, p, battery=fleet.battery_capacity) for p in starts]
    navs = [_Nav(p) for p in starts]
    records: list[dict] = []
    done_flags = [False] * m
    t = 0.0

    def log(rec: dict):
        records.append(rec)

    def command(j: int, c: Command):
        nav, st = navs[j], states[j]
        a = c.action
        if a is None:
            nav.mode = "hover"
            log({"t": _r(t), "kind": "agent", "uav": j, "note": c.note})
            return
        if c.note == "resume" and nav.saved is not None:
            nav.mode, nav.seg, nav.pace, nav.target, nav.t0, nav.s0 = nav.saved
            nav.saved = None
            return
        if a.kind == "goto":
            b = Point(*a.absolute_destination) if a.absolute_destination is not None else \
                Point(st.true_pos.x + a.relative_distance[0], st.true_pos.y + a.relative_distance[1])
            step = agents[j].current.index
            seg = mon.segments[j].get(step)
            if a.duration is not None and seg is not None:
                nav.mode, nav.seg, nav.target, nav.t0 = "leg", seg, b, t
                L = dist(*seg)
                nav.s0 = _along(st.true_pos, seg) if L > 0 else 0.0
                left = max(L - nav.s0, 0.0)
                nav.pace = fleet.cruise_speed if a.duration <= 0 else min(fleet.cruise_speed, left / a.duration)
            else:
                if agents[j].suspended and nav.mode == "leg":
                    nav.saved = (nav.mode, nav.seg, nav.pace, nav.target, nav.t0, nav.s0)
                nav.mode, nav.seg, nav.target, nav.pace = "direct", None, b, fleet.cruise_speed
        elif a.kind == "return_home":
            nav.saved = None
            nav.mode, nav.seg, nav.target, nav.pace = "direct", None, nav.home, fleet.cruise_speed
        elif a.kind == "wait":
            nav.mode, nav.wait_left = "wait", a.duration or 0.0
        else:  # takeoff / land are instantaneous in the plane
            nav.mode = "instant"

    queue: deque = deque()

    def to_monitor(j: int, p: Packet):
        queue.append(("up", j, p))

    def pump():
        while queue:
            direction, j, p = queue.popleft()
            p = decode(encode(p))
            log({"t": _r(t), "kind": "packet", "dir": direction, "uav": j, "type": p.ptype, "body": p.body})
            if direction == "up":
                for dest, q in mon.handle(j, p, t):
                    queue.append(("down", dest, q))
                for ev in mon.events:
                    log(ev)
                mon.events.clear()
            else:
                emit(j, agents[j].step(Receive(p)))

    def emit(j: int, outs):
        for o in outs:
            if isinstance(o, Packet):
                to_monitor(j, o)
            else:
                command(j, o)

    for j in range(m):
        emit(j, agents[j].step(Connect()))
        pump()

    plan_time = sum(max(dist(w[k], w[k + 1]) for w in plan.waypoints) for k in range(len(plan.waypoints[0]) - 1)) \
        / fleet.cruise_speed if len({len(w) for w in plan.waypoints}) == 1 else \
        max(sum(dist(w[k], w[k + 1]) for k in range(len(w) - 1)) for w in plan.waypoints) / fleet.cruise_speed
    max_time = cfg.max_time if cfg.max_time is not None else 3 * plan_time + 120.0
    status_every = max(1, round(cfg.status_period / cfg.dt))
    kicks = sorted(cfg.kicks, key=lambda k: k[0])
    kick_i = 0
    history = [[tuple(s.true_pos) for s in states]]
    conn_bad = [0] * m
    min_pair = math.inf
    curves: list[list[tuple[float, float]]] = [[] for _ in range(m)]
    tick = 0
    completed = False
    step_cap = cfg.dt * fleet.cruise_speed

    def complete() -> bool:
        return all(a.state == AgentState.IDLE and not a.queue and not a.suspended for a in agents)

    while True:
        if complete():
            completed = True
            break
        if not any(a.state == AgentState.EXECUTING for a in agents):
            log({"t": _r(t), "kind": "stalled"})
            break
        if t >= max_time:
            log({"t": _r(t), "kind": "timeout"})
            break
        tick += 1
        t = tick * cfg.dt
        while kick_i < len(kicks) and kicks[kick_i][0] <= t:
            _, who, (dx, dy) = kicks[kick_i]
            for j in (range(m) if who < 0 else [who]):
                p = states[j].true_pos
                states[j].true_pos = Point(p.x + dx, p.y + dy)
            log({"t": _r(t), "kind": "kick", "uav": who, "offset": [dx, dy]})
            kick_i += 1
        held = set()
        if m > 1:
            for a, b in collision_warnings([s.true_pos for s in states], [s.velocity for s in states],
                                           cfg.collide_dist, cfg.collide_horizon):
                held.add(b)
                log({"t": _r(t), "kind": "collision_warning", "pair": [a, b]})
        wind = rng.normal(0.0, cfg.wind_sigma, size=(m, 2)) if cfg.wind_sigma > 0 else np.zeros((m, 2))
        if cfg.gust is not None and cfg.gust[0] <= t < cfg.gust[1]:
            wind = wind + np.asarray(cfg.gust[2], float)
        for j in range(m):
            st, nav = states[j], navs[j]
            old = st.true_pos
            pos = old
            arrived = False
            if j not in held and agents[j].state == AgentState.EXECUTING:
                pos, arrived = _advance(nav, pos, step_cap, cfg, t)
            new = Point(pos.x + wind[j, 0] * cfg.dt, pos.y + wind[j, 1] * cfg.dt)
            st.cumulative_distance += dist(old, new)
            st.velocity = ((new.x - old.x) / cfg.dt, (new.y - old.y) / cfg.dt)
            st.true_pos = new
            st.cumulative_time = t
            done_flags[j] = arrived
        for j in range(m):
            if done_flags[j] and agents[j].state == AgentState.EXECUTING:
                emit(j, agents[j].step(ActionDone()))
                pump()
        history.append(tuple(tuple(s.true_pos) for s in states))
        if m > 1:
            P = np.array(history[-1])
            D = np.linalg.norm(P[:, None] - P[None], axis=-1)
            np.fill_diagonal(D, np.inf)
            min_pair = min(min_pair, float(D.min()))
            for j in np.flatnonzero(D.min(axis=1) > fleet.w + LINK_TOL):
                conn_bad[int(j)] += 1
        if tick % status_every == 0:
            gps = rng.normal(0.0, cfg.gps_sigma, size=(m, 2)) if cfg.gps_sigma > 0 else np.zeros((m, 2))
            for j in range(m):
                st = states[j]
                _update_energy(st, models, fleet.battery_capacity, curves[j])
                st.reported_pos = Point(st.true_pos.x + gps[j, 0], st.true_pos.y + gps[j, 1])
                log({"t": _r(t), "kind": "state", "uav": j, "pos": _pt(st.true_pos),
                     "d": _r(st.cumulative_distance), "battery": _r(st.battery)})
                frac = st.battery / fleet.battery_capacity if fleet.battery_capacity > 0 else 0.0
                status = {"pos": _pt(st.reported_pos), "vel": _pt(st.velocity), "battery": _r(max(frac, 0.0)),
                          "t": _r(st.cumulative_time), "d": _r(st.cumulative_distance)}
                if models is not None:
                    status["energy"] = _r(st.energy)
                emit(j, agents[j].step(StatusTick(status)))
                pump()

    for j in range(m):
        _update_energy(states[j], models, fleet.battery_capacity, curves[j])
    positions = np.array(history, dtype=float)
    paths = [positions[:, j, :] for j in range(m)]
    hit = covered_mask(paths, inst.targets, eps_cov)
    counts = Counter(r["kind"] for r in records)
    div = Counter(r.get("action") for r in records if r["kind"] == "divergence")
    uavs = [{"t": _r(s.cumulative_time), "d": _r(s.cumulative_distance), "energy": _r(s.energy),
             "violations": {"connectivity": conn_bad[j]}} for j, s in enumerate(states)]
    summary = {
        "completed": completed,
        "duration_s": _r(t),
        "fleet_distance": _r(max(s.cumulative_distance for s in states)),
        "plan_fleet_cost": _r(plan.report.fleet_cost),
        "targets": len(inst.targets),
        "covered": int(hit.sum()),
        "uncovered": [_pt(p) for p, h in zip(inst.targets, hit) if not h],
        "connectivity_violation_ticks": int(sum(conn_bad)),
        "min_pair_distance": _r(min_pair) if math.isfinite(min_pair) else None,
        "corrections": div.get("correct", 0),
        "replans": counts.get("replan", 0),
        "collision_warnings": counts.get("collision_warning", 0),
        "exceptions": counts.get("exception", 0),
        "uavs": uavs,
    }
    return MissionTrace(records, positions, summary, curves, [s.battery for s in states])


def _update_energy(st: UavState, models: EnergyModels | None, capacity: float, curve: list) -> None:
    if models is None:
        return
    e = max(st.energy, float(models.predict(st.cumulative_time, st.cumulative_distance)))
    st.energy = e
    st.battery = max(capacity - e, 0.0)
    curve.append((st.cumulative_time, e))


def _along(p: Point, seg: tuple[Point, Point]) -> float:
    a, b = seg
    L = dist(a, b)
    s = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / L
    return min(L, max(0.0, s))


def _advance(nav: _Nav, pos: Point, cap: float, cfg: SimConfig, t: float) -> tuple[Point, bool]:
    """One autopilot tick; returns the new position and whether the action finished.

    On a planned leg the autopilot tracks a timed schedule along the segment,
    so lanes stay abreast despite wind, and it trims cross-track error at a
    limited rate; larger offsets are left to the divergence monitor.
    """
    if nav.mode == "instant":
        return pos, True
    if nav.mode == "wait":
        nav.wait_left -= cfg.dt
        return pos, nav.wait_left <= 1e-9
    if nav.mode == "direct":
        b = nav.target
        d = dist(pos, b)
        if d <= cap:
            return b, True
        k = cap / d
        return Point(pos.x + (b.x - pos.x) * k, pos.y + (b.y - pos.y) * k), False
    if nav.mode != "leg":
        return pos, False
    a, b = nav.seg
    L = dist(a, b)
    if L <= 1e-12:
        d = dist(pos, b)
        if d <= cap:
            return b, True
        k = cap / d
        return Point(pos.x + (b.x - pos.x) * k, pos.y + (b.y - pos.y) * k), False
    ux, uy = (b.x - a.x) / L, (b.y - a.y) / L
    rx, ry = pos.x - a.x, pos.y - a.y
    s = rx * ux + ry * uy
    lx, ly = rx - s * ux, ry - s * uy
    s_new = min(L, nav.s0 + nav.pace * (t - nav.t0))
    lat = math.hypot(lx, ly)
    lim = cfg.xtrack_rate * cfg.dt
    if s_new >= L and lat <= lim and s >= L - cap:
        return b, True
    k = 1.0 if lat <= lim else lim / lat
    mx = (s_new - s) * ux - lx * k
    my = (s_new - s) * uy - ly * k
    n = math.hypot(mx, my)
    if n > cap:
        mx, my = mx * cap / n, my * cap / n
    new = Point(pos.x + mx, pos.y + my)
    if s_new >= L and dist(new, b) <= cfg.arrive_tol:
        return new, True
    return new, False
