"""Two-step energy model: affine sim-to-real calibration, then kernel ridge regression.

The consumption model maps real (time, distance) to joules with a Gaussian
kernel on standardized features.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

CSV_COLUMNS = ("t_sim_s", "d_sim_m", "t_real_s", "d_real_m", "energy_j")
SAFETY_FACTOR = 0.8


@dataclass(frozen=True)
class FlightSample:
    t: float
    d: float
    energy: float
    t_sim: float | None = None
    d_sim: float | None = None

    def __post_init__(self):
        for name in ("t", "d", "energy", "t_sim", "d_sim"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class CalibrationModel:
    A: np.ndarray  # 2x3, [t_sim, d_sim, 1] -> [t_real, d_real]

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.shape != (2, 3) or not np.isfinite(A).all():
            raise ValueError("calibration matrix must be a finite 2x3 array")
        object.__setattr__(self, "A", A)

    @classmethod
    def identity(cls) -> "CalibrationModel":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def apply(self, t_sim, d_sim) -> tuple[np.ndarray, np.ndarray]:
        t_sim, d_sim = np.asarray(t_sim, float), np.asarray(d_sim, float)
        X = np.stack([t_sim, d_sim, np.ones_like(t_sim)], axis=-1)
        out = X @ self.A.T
        return out[..., 0], out[..., 1]

    def to_json(self) -> dict:
        return {"A": self.A.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "CalibrationModel":
        return cls(np.array(obj["A"], dtype=float))


@dataclass(frozen=True)
class ConsumptionModel:
    support: np.ndarray  # standardized features, n x 2
    alpha: np.ndarray
    bandwidth: float
    ridge: float
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if len(self.support) != len(self.alpha):
            raise ValueError("support and alpha sizes differ")
        for name in ("bandwidth", "ridge"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive")

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, float) - self.mean) / self.scale

    def raw_predict(self, t, d) -> np.ndarray:
        Z = self.standardize(np.stack([np.asarray(t, float), np.asarray(d, float)], axis=-1))
        K = gaussian_kernel(Z.reshape(-1, 2), self.support, self.bandwidth)
        return (K @ self.alpha).reshape(np.shape(t))

    def to_json(self) -> dict:
        return {"support": self.support.tolist(), "alpha": self.alpha.tolist(),
                "bandwidth": self.bandwidth, "ridge": self.ridge,
                "mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "ConsumptionModel":
        return cls(np.array(obj["support"], float).reshape(-1, 2), np.array(obj["alpha"], float),
                   float(obj["bandwidth"]), float(obj["ridge"]),
                   np.array(obj["mean"], float), np.array(obj["scale"], float))


@dataclass(frozen=True)
class EnergyModels:
    calibration: CalibrationModel
    consumption: ConsumptionModel

    def predict(self, t_sim, d_sim):
        return predict_energy(self.calibration, self.consumption, t_sim, d_sim)

    def to_json(self) -> dict:
        return {"calibration": self.calibration.to_json(), "consumption": self.consumption.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "EnergyModels":
        return cls(CalibrationModel.from_json(obj["calibration"]),
                   ConsumptionModel.from_json(obj["consumption"]))


def save_models(models: EnergyModels, path) -> None:
    Path(path).write_text(json.dumps(models.to_json()) + "\n")


def load_models(path) -> EnergyModels:
    return EnergyModels.from_json(json.loads(Path(path).read_text()))


def gaussian_kernel(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (2.0 * sigma * sigma))


def fit_calibration(pairs: Sequence[Sequence[float]]) -> CalibrationModel:
    """Least-squares affine map from simulated to real (time, distance)."""
    P = np.asarray(pairs, dtype=float).reshape(-1, 4)
    if len(P) < 3:
        raise ValueError("calibration needs at least 3 pairs")
    X = np.column_stack([P[:, 0], P[:, 1], np.ones(len(P))])
    if np.linalg.matrix_rank(X) < 3:
        raise ValueError("degenerate calibration data")
    coef, *_ = np.linalg.lstsq(X, P[:, 2:4], rcond=None)
    return CalibrationModel(coef.T)


def median_bandwidth(Z: np.ndarray) -> float:
    n = len(Z)
    iu = np.triu_indices(n, k=1)
    d = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(-1))[iu]
    med = float(np.median(d)) if len(d) else 0.0
    return med if med > 0 else 1.0


def fit_consumption(samples: Sequence[FlightSample] | np.ndarray, ridge: float = 1e-3,
                    bandwidth: float | None = None) -> ConsumptionModel:
    """Kernel ridge regression on standardized (t, d).

    ``samples`` may be FlightSample objects or an (n, 3) array of t, d, energy.
    """
    if len(samples) and isinstance(samples[0], FlightSample):
        data = np.array([[s.t, s.d, s.energy] for s in samples], dtype=float)
    else:
        data = np.asarray(samples, dtype=float).reshape(-1, 3)
    if len(data) < 2:
        raise ValueError("consumption model needs at least 2 samples")
    X, y = data[:, :2], data[:, 2]
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    sigma = median_bandwidth(Z) if bandwidth is None else float(bandwidth)
    n = len(Z)
    K = gaussian_kernel(Z, Z, sigma)
    try:
        c = cho_factor(K + ridge * n * np.eye(n), lower=True)
    except LinAlgError:
        raise ValueError("kernel system is not positive definite") from None
    alpha = cho_solve(c, y)
    return ConsumptionModel(Z, alpha, sigma, float(ridge), mean, scale)


def predict_energy(cal: CalibrationModel, con: ConsumptionModel, t_sim, d_sim):
    t, d = cal.apply(t_sim, d_sim)
    e = np.maximum(con.raw_predict(t, d), 0.0)
    return float(e) if np.ndim(e) == 0 else e


def check_feasibility(per_uav_distance: Sequence[float], cruise_speed: float, battery_capacity: float,
                      models: EnergyModels, factor: float = SAFETY_FACTOR) -> list[dict]:
    """Predicted energy per UAV against the usable share of its battery."""
    out = []
    budget = factor * battery_capacity
    for L in per_uav_distance:
        e = models.predict(L / cruise_speed, L)
        out.append({"predicted_j": e, "budget_j": budget, "feasible": e <= budget})
    return out


def plan_feasibility(plan, fleet, models: EnergyModels) -> list[dict]:
    return check_feasibility(plan.report.per_uav_distance, fleet.cruise_speed, fleet.battery_capacity, models)


# -- CSV ----------------------------------------------------------------------------

def _cell(row: dict, col: str, lineno: int) -> float | None:
    raw = (row.get(col) or "").strip()
    if raw == "":
        return None
    try:
        v = float(raw)
    except ValueError:
        raise ValueError(f"line {lineno}: column {col!r} is not a number: {raw!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"line {lineno}: column {col!r} is not finite")
    return v


def read_training_csv(text: str) -> tuple[list[tuple], list[FlightSample]]:
    """Split training rows into calibration pairs and consumption samples."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ValueError("empty CSV")
    for col in CSV_COLUMNS:
        if col not in reader.fieldnames:
            raise ValueError(f"missing column {col!r}")
    pairs, samples = [], []
    for i, row in enumerate(reader, start=2):
        v = {c: _cell(row, c, i) for c in CSV_COLUMNS}
        ts, ds, tr, dr, e = (v[c] for c in CSV_COLUMNS)
        if tr is None or dr is None:
            col = "t_real_s" if tr is None else "d_real_m"
            raise ValueError(f"line {i}: column {col!r} is required")
        if (ts is None) != (ds is None):
            col = "t_sim_s" if ts is None else "d_sim_m"
            raise ValueError(f"line {i}: column {col!r} is blank while its partner is set")
        if ts is not None:
            pairs.append((ts, ds, tr, dr))
        if e is not None:
            samples.append(FlightSample(tr, dr, e, ts, ds))
    return pairs, samples


def write_training_csv(pairs_or_rows: Iterable[Sequence], path=None) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in pairs_or_rows:
        buf.write(",".join("" if x is None else f"{x:.6f}" for x in row) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def fit_models(text: str, ridge: float = 1e-3, bandwidth: float | None = None) -> EnergyModels:
    pairs, samples = read_training_csv(text)
    cal = fit_calibration(pairs) if pairs else CalibrationModel.identity()
    return EnergyModels(cal, fit_consumption(samples, ridge, bandwidth))


# -- synthetic field data --------------------------------------------------------------

def field_energy(t, d, c=(380.0, 20.0, 5.0)):
    """Ground-truth consumption used by the synthetic field generator."""
    t, d = np.asarray(t, float), np.asarray(d, float)
    return c[0] * t + c[1] * d + c[2] * np.sqrt(t * d)


def sim_to_real(t_sim, d_sim):
    """Hidden distortion between simulated and measured flights."""
    return 0.97 * np.asarray(t_sim) + 2.0, 1.1 * np.asarray(d_sim) - 3.0


@dataclass
class SyntheticField:
    train_rows: list[tuple]
    test_sim: np.ndarray   # n x 2 (t_sim, d_sim) flight totals
    test_energy: np.ndarray


def synthetic_field(seed: int = 0, flights: int = 6, checkpoints: int = 10, tests: int = 30,
                    noise: float = 0.02) -> SyntheticField:
    """Cumulative training checkpoints and end-of-flight test totals.

    Flights last up to about 610 s at 1.2 to 1.75 m/s, so totals stay under
    roughly 250 kJ.
    """
    rng = np.random.default_rng(seed)

    def flight(t_end):
        speed = rng.uniform(1.2, 1.75)
        return t_end, speed * t_end

    rows = []
    for _ in range(flights):
        t_end, d_end = flight(rng.uniform(300, 610))
        for k in range(1, checkpoints + 1):
            ts, ds = t_end * k / checkpoints, d_end * k / checkpoints
            tr, dr = sim_to_real(ts, ds)
            tr, dr = tr + rng.normal(0, 0.5), max(dr + rng.normal(0, 1.0), 0.0)
            e = float(field_energy(tr, dr) * (1 + noise * rng.normal()))
            rows.append((ts, ds, tr, dr, e))
    sims, energies = [], []
    for _ in range(tests):
        ts, ds = flight(rng.uniform(60, 610))
        tr, dr = sim_to_real(ts, ds)
        sims.append((ts, ds))
        energies.append(float(field_energy(tr, dr) * (1 + noise * rng.normal())))
    return SyntheticField(rows, np.array(sims), np.array(energies))


def mean_relative_error(models: EnergyModels, data: SyntheticField) -> float:
    pred = models.predict(data.test_sim[:, 0], data.test_sim[:, 1])
    return float(np.mean(np.abs(pred - data.test_energy) / data.test_energy))
