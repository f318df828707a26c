"""Problem instances, slotted trajectories and the constraint validator."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Point, as_point, dist, lerp

SPEED_TOL = 1e-6
LINK_TOL = 1e-6
DEFAULT_EPS_COV = 0.5


@dataclass(frozen=True)
class FleetConfig:
    m: int
    w: float
    d_max: float
    cruise_speed: float = 4.0
    battery_capacity: float = 300e3

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("fleet needs at least one UAV")
        for name in ("w", "d_max", "cruise_speed"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.battery_capacity < 0:
            raise ValueError("battery_capacity must be non-negative")


@dataclass(frozen=True)
class Instance:
    width: float
    height: float
    targets: tuple[Point, ...]
    fleet: FleetConfig
    seed: int = 0

    def __post_init__(self):
        if not self.targets:
            raise ValueError("instance needs at least one target")
        pts = tuple(as_point(p) for p in self.targets)
        object.__setattr__(self, "targets", pts)
        for p in pts:
            if not (-1e-9 <= p.x <= self.width + 1e-9 and -1e-9 <= p.y <= self.height + 1e-9):
                raise ValueError(f"target {tuple(p)} outside the {self.width}x{self.height} area")

    def to_json(self) -> dict:
        f = self.fleet
        return {
            "area": {"width": self.width, "height": self.height},
            "targets": [[p.x, p.y] for p in self.targets],
            "fleet": {"m": f.m, "w": f.w, "d_max": f.d_max, "speed": f.cruise_speed,
                      "battery_j": f.battery_capacity},
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        try:
            area, fl = obj["area"], obj["fleet"]
            fleet = FleetConfig(m=int(fl["m"]), w=float(fl["w"]), d_max=float(fl["d_max"]),
                                cruise_speed=float(fl["speed"]),
                                battery_capacity=float(fl["battery_j"]))
            return cls(float(area["width"]), float(area["height"]),
                       tuple(as_point(p) for p in obj["targets"]), fleet, int(obj.get("seed", 0)))
        except KeyError as exc:
            raise ValueError(f"instance file missing field {exc.args[0]!r}") from None


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_json(), indent=1) + "\n")


def load_instance(path) -> Instance:
    return Instance.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Trajectory:
    uav_id: int
    positions: tuple[Point, ...]

    @property
    def slots(self) -> list[tuple[int, Point]]:
        return list(enumerate(self.positions))

    @property
    def horizon(self) -> int:
        return len(self.positions)

    def length(self) -> float:
        p = self.positions
        return sum(dist(p[i], p[i + 1]) for i in range(len(p) - 1))


@dataclass
class PlanReport:
    per_uav_distance: list[float]
    fleet_cost: float
    rounds: int = 0
    per_round_boundary: list[float] = field(default_factory=list)
    transfer: float = 0.0
    adjust: float = 0.0
    lower_bound: float = 0.0

    def to_json(self) -> dict:
        return {"L_j": list(self.per_uav_distance), "L_fleet": self.fleet_cost,
                "LB": self.lower_bound, "L_adjust": self.adjust, "L_trans": self.transfer,
                "K": self.rounds, "L_b": list(self.per_round_boundary)}

    @classmethod
    def from_json(cls, obj: dict) -> "PlanReport":
        return cls(list(obj["L_j"]), obj["L_fleet"], obj.get("K", 0), list(obj.get("L_b", [])),
                   obj.get("L_trans", 0.0), obj.get("L_adjust", 0.0), obj.get("LB", 0.0))


@dataclass(frozen=True)
class Violation:
    kind: str
    uav: int
    slot: int
    value: float


def _subdivide(a: Point, b: Point, step: float) -> list[Point]:
    """Points after ``a`` up to and including ``b``, ``step`` apart."""
    L = dist(a, b)
    if L == 0.0:
        return []
    n = max(1, math.ceil(L / step - 1e-9))
    return [lerp(a, b, min(1.0, i * step / L)) for i in range(1, n)] + [b]


def discretize(waypoints: Sequence[Sequence], fleet: FleetConfig,
               synchronized: bool = False) -> list[Trajectory]:
    """Turn waypoint polylines into slotted positions, ``d_max`` per slot.

    Independent mode paces every UAV on its own and pads short paths by
    hovering.  Synchronized mode requires equal waypoint counts and splits
    each leg into the same number of slots for every UAV, paced by the longest
    leg, so a formation stays a linear blend of its waypoint formations.
    """
    if not waypoints or any(len(w) == 0 for w in waypoints):
        raise ValueError("every UAV needs at least one waypoint")
    paths = [[as_point(p) for p in w] for w in waypoints]
    step = fleet.d_max
    if synchronized:
        if len({len(p) for p in paths}) != 1:
            raise ValueError("synchronized discretization needs equal waypoint counts")
        out = [[p[0]] for p in paths]
        for k in range(len(paths[0]) - 1):
            legs = [(p[k], p[k + 1]) for p in paths]
            L = max(dist(a, b) for a, b in legs)
            if L == 0.0:
                continue
            n = max(1, math.ceil(L / step - 1e-9))
            fr = [min(1.0, i * step / L) for i in range(1, n)] + [1.0]
            for j, (a, b) in enumerate(legs):
                out[j].extend(b if f == 1.0 else lerp(a, b, f) for f in fr)
    else:
        out = []
        for p in paths:
            seq = [p[0]]
            for k in range(len(p) - 1):
                seq.extend(_subdivide(p[k], p[k + 1], step))
            out.append(seq)
    T = max(len(s) for s in out)
    return [Trajectory(j, tuple(s + [s[-1]] * (T - len(s)))) for j, s in enumerate(out)]


def _stack(trajs: Sequence[Trajectory]) -> np.ndarray:
    if len({t.horizon for t in trajs}) > 1:
        raise ValueError("trajectories have different lengths")
    return np.array([t.positions for t in trajs], dtype=float).reshape(len(trajs), -1, 2)


def check_speed(trajs: Sequence[Trajectory], d_max: float) -> list[Violation]:
    out = []
    for tr in trajs:
        p = tr.positions
        for t in range(len(p) - 1):
            step = dist(p[t], p[t + 1])
            if step > d_max + SPEED_TOL:
                out.append(Violation("speed", tr.uav_id, t, step))
    return out


def check_connectivity(trajs: Sequence[Trajectory], w: float) -> list[Violation]:
    """Every UAV must have another UAV within ``w`` at every slot."""
    if len(trajs) < 2:
        return []
    P = _stack(trajs)
    D = np.linalg.norm(P[:, None, :, :] - P[None, :, :, :], axis=-1)
    m = len(trajs)
    D[np.arange(m), np.arange(m), :] = np.inf
    nearest = D.min(axis=1)
    bad = np.argwhere(nearest > w + LINK_TOL)
    return [Violation("connectivity", trajs[j].uav_id, int(t), float(nearest[j, t]))
            for j, t in bad]


def check_station_link(trajs: Sequence[Trajectory], station, radius: float) -> list[Violation]:
    """Optional: some UAV within ``radius`` of the ground station at each slot."""
    P = _stack(trajs)
    d = np.linalg.norm(P - np.asarray(station, float), axis=-1).min(axis=0)
    return [Violation("station", -1, int(t), float(d[t])) for t in np.flatnonzero(d > radius + LINK_TOL)]


def segment_point_distances(targets: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Distance matrix (targets x segments)."""
    d = ends - starts
    L2 = np.einsum("ij,ij->i", d, d)
    rel = targets[:, None, :] - starts[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(L2 > 0, np.einsum("tsk,sk->ts", rel, d) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = starts[None, :, :] + t[..., None] * d[None, :, :]
    return np.linalg.norm(targets[:, None, :] - q, axis=-1)


def covered_mask(paths: Sequence[Sequence], targets, eps_cov: float = DEFAULT_EPS_COV) -> np.ndarray:
    """Which targets lie within ``eps_cov`` of any swept segment of ``paths``."""
    tg = np.asarray(targets, dtype=float).reshape(-1, 2)
    hit = np.zeros(len(tg), dtype=bool)
    for path in paths:
        P = np.asarray(path, dtype=float).reshape(-1, 2)
        if len(P) == 1:
            P = np.vstack([P, P])
        for lo in range(0, len(P) - 1, 2048):
            s, e = P[lo:lo + 2048], P[lo + 1:lo + 2049]
            s = s[:len(e)]
            todo = ~hit
            if not todo.any():
                return hit
            hit[todo] |= (segment_point_distances(tg[todo], s, e) <= eps_cov).any(axis=1)
    return hit


def check_coverage(trajs: Sequence[Trajectory], targets, eps_cov: float = DEFAULT_EPS_COV) -> list[Point]:
    if eps_cov <= 0:
        raise ValueError("eps_cov must be positive")
    tg = [as_point(p) for p in targets]
    hit = covered_mask([t.positions for t in trajs], tg, eps_cov)
    return [p for p, h in zip(tg, hit) if not h]


def fleet_cost(trajs: Sequence[Trajectory]) -> PlanReport:
    L = [t.length() for t in trajs]
    return PlanReport(per_uav_distance=L, fleet_cost=max(L) if L else 0.0)


def validate(trajs: Sequence[Trajectory], inst: Instance, eps_cov: float = DEFAULT_EPS_COV) -> dict:
    """All three constraint checks in one report."""
    return {
        "speed": check_speed(trajs, inst.fleet.d_max),
        "connectivity": check_connectivity(trajs, inst.fleet.w),
        "coverage": check_coverage(trajs, inst.targets, eps_cov),
    }


def generate_instance(width: float, height: float, n: int, fleet: FleetConfig, seed: int = 0) -> Instance:
    """Uniform i.i.d. targets in the rectangle, reproducible from ``seed``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not (width > 0 and height > 0):
        raise ValueError("area dimensions must be positive")
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, 1.0, size=(n, 2)) * (width, height)
    return Instance(float(width), float(height), tuple(Point(float(x), float(y)) for x, y in xy), fleet, seed)
