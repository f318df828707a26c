"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (violations, infeasible, planner
error), 2 usage or I/O problems.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import energy as en
from .model import FleetConfig, Instance, generate_instance, validate
from .planner import Plan, greedy_plan, psa_plan
from .render import render_bench, render_mission
from .simulator import SimConfig, run_mission

BENCH_COLUMNS = ("sweep", "value", "reps", "psa_mean", "psa_std", "greedy_mean", "greedy_std", "lb_mean", "lb_std")


class UsageError(Exception):
    pass


def _f(x: float) -> str:
    return f"{x:.6f}"


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc.msg}") from None


def _instance(path: str) -> Instance:
    try:
        return Instance.from_json(_read_json(path))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _plan(path: str) -> Plan:
    try:
        return Plan.from_json(_read_json(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: bad plan file ({exc})") from None


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def report_table(plan: Plan) -> str:
    r = plan.report
    lines = [f"{'uav':>4} {'L_j':>14}"]
    lines += [f"{j:>4} {_f(L):>14}" for j, L in enumerate(r.per_uav_distance)]
    lines += [f"L_fleet  {_f(r.fleet_cost)}", f"LB       {_f(r.lower_bound)}",
              f"L_adjust {_f(r.adjust)}", f"L_trans  {_f(r.transfer)}", f"K        {r.rounds}"]
    return "\n".join(lines) + "\n"


# -- commands -----------------------------------------------------------------------

def cmd_gen(args) -> int:
    try:
        fleet = FleetConfig(args.m, args.w, args.d_max, args.speed, args.battery)
        inst = generate_instance(args.width, args.height, args.n, fleet, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = json.dumps(inst.to_json(), indent=1) + "\n"
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def _make_plan(inst: Instance, algo: str, spacing, eps_cov: float) -> Plan:
    if algo == "psa":
        return psa_plan(inst, spacing=spacing, eps_cov=eps_cov)
    return greedy_plan(inst, spacing=spacing, eps_cov=eps_cov)


def cmd_plan(args) -> int:
    inst = _instance(args.instance)
    try:
        plan = _make_plan(inst, args.algo, args.spacing, args.eps_cov)
    except ValueError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return 1
    if args.out:
        _write(Path(args.out), json.dumps(plan.to_json()) + "\n")
    sys.stdout.write(report_table(plan))
    return 0


def cmd_validate(args) -> int:
    inst, plan = _instance(args.instance), _plan(args.plan)
    if len(plan.waypoints) != inst.fleet.m:
        print(f"plan has {len(plan.waypoints)} UAVs but the instance fleet has {inst.fleet.m}", file=sys.stderr)
        return 1
    res = validate(plan.trajectories(inst.fleet), inst, args.eps_cov)
    bad = 0
    for v in res["speed"] + res["connectivity"]:
        print(f"{v.kind} uav={v.uav} slot={v.slot} value={_f(v.value)}")
        bad += 1
    for p in res["coverage"]:
        print(f"coverage target=({_f(p.x)}, {_f(p.y)})")
        bad += 1
    print("clean" if not bad else f"{bad} violation(s)")
    return 0 if not bad else 1


def _models(path):
    if not path:
        return None
    try:
        return en.EnergyModels.from_json(_read_json(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: bad model file ({exc})") from None


def _config(path, seed) -> SimConfig:
    obj = _read_json(path) if path else {}
    if seed is not None:
        obj["seed"] = seed
    try:
        return SimConfig.from_json(obj)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad simulation config: {exc}") from None


def cmd_simulate(args) -> int:
    inst, plan = _instance(args.instance), _plan(args.plan)
    models = _models(args.models)
    cfg = _config(args.config, args.seed)
    try:
        trace = run_mission(inst, plan, models, cfg, eps_cov=args.eps_cov)
    except ValueError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    _write(out / "trace.ndjson", trace.to_ndjson())
    _write(out / "summary.json", trace.summary_json())
    tracks = [trace.positions[:, j, :].tolist() for j in range(inst.fleet.m)]
    _write(out / "mission.svg", render_mission(inst, plan.waypoints, tracks, "simulated mission"))
    s = trace.summary
    print(f"completed {s['completed']}  covered {s['covered']}/{s['targets']}  "
          f"fleet distance {_f(s['fleet_distance'])}  plan {_f(s['plan_fleet_cost'])}  "
          f"connectivity ticks {s['connectivity_violation_ticks']}")
    ok = s["completed"] and s["covered"] == s["targets"] and s["connectivity_violation_ticks"] == 0
    return 0 if ok else 1


@dataclass
class BenchSpec:
    sweep: str
    values: list[int]
    repetitions: int = 50
    n: int = 30
    m: int = 4
    w: float = 10.0
    size: float = 400.0
    d_max: float = 4.0
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sweep not in ("n", "m"):
            raise ValueError("sweep must be 'n' or 'm'")
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


def run_bench(spec: BenchSpec) -> list[dict]:
    rows = []
    for v in spec.values:
        n = v if spec.sweep == "n" else spec.n
        m = v if spec.sweep == "m" else spec.m
        fleet = FleetConfig(m, spec.w, spec.d_max)
        psa, gr, lb = [], [], []
        for rep in range(spec.repetitions):
            inst = generate_instance(spec.size, spec.size, n, fleet, spec.seed + rep)
            p = psa_plan(inst)
            psa.append(p.report.fleet_cost)
            lb.append(p.report.lower_bound)
            gr.append(greedy_plan(inst).report.fleet_cost)
        row = {"sweep": spec.sweep, "value": v, "reps": spec.repetitions}
        for key, xs in (("psa", psa), ("greedy", gr), ("lb", lb)):
            row[f"{key}_mean"] = float(np.mean(xs))
            row[f"{key}_std"] = float(np.std(xs))
        rows.append(row)
    return rows


def bench_csv(rows: list[dict]) -> str:
    lines = [",".join(BENCH_COLUMNS)]
    for r in rows:
        lines.append(",".join(str(r[c]) if c in ("sweep", "value", "reps") else _f(r[c]) for c in BENCH_COLUMNS))
    return "\n".join(lines) + "\n"


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad value list {text!r}") from None


def cmd_bench(args) -> int:
    try:
        spec = BenchSpec(args.sweep, _int_list(args.values), args.reps, args.n, args.m, args.w, args.size,
                         args.d_max, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = run_bench(spec)
    text = bench_csv(rows)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        _write(out / "bench.csv", text)
        _write(out / "bench.svg", render_bench(rows, spec.sweep))
    return 0


def cmd_energy_fit(args) -> int:
    try:
        text = Path(args.csv).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.csv}: {exc.strerror}") from None
    try:
        models = en.fit_models(text, args.ridge, args.bandwidth)
    except ValueError as exc:
        raise UsageError(f"{args.csv}: {exc}") from None
    _write(Path(args.out), json.dumps(models.to_json()) + "\n")
    print(f"fitted {len(models.consumption.alpha)} samples, bandwidth {_f(models.consumption.bandwidth)}")
    return 0


def cmd_energy_predict(args) -> int:
    models = _models(args.model)
    rows = []
    if args.csv:
        try:
            pairs, samples = en.read_training_csv(Path(args.csv).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read {args.csv}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"{args.csv}: {exc}") from None
        rows = [(s.t_sim, s.d_sim, s.energy) for s in samples if s.t_sim is not None]
    if args.t_sim is not None:
        rows.append((args.t_sim, args.d_sim if args.d_sim is not None else 0.0, None))
    if not rows:
        raise UsageError("nothing to predict: give --t-sim/--d-sim or --csv")
    print("t_sim_s,d_sim_m,predicted_j,energy_j")
    for t, d, e in rows:
        print(f"{_f(t)},{_f(d)},{_f(models.predict(t, d))},{'' if e is None else _f(e)}")
    if args.battery is not None and args.t_sim is not None:
        pred = models.predict(args.t_sim, args.d_sim or 0.0)
        if pred > en.SAFETY_FACTOR * args.battery:
            print("infeasible", file=sys.stderr)
            return 1
    return 0


def cmd_render(args) -> int:
    inst = _instance(args.instance)
    wps = _plan(args.plan).waypoints if args.plan else None
    tracks = None
    if args.trace:
        try:
            lines = Path(args.trace).read_text().splitlines()
        except OSError as exc:
            raise UsageError(f"cannot read {args.trace}: {exc.strerror}") from None
        per: dict[int, list] = {}
        for ln in lines:
            rec = json.loads(ln)
            if rec.get("kind") == "state":
                per.setdefault(rec["uav"], []).append(rec["pos"])
        tracks = [per[k] for k in sorted(per)]
    _write(Path(args.out), render_mission(inst, wps, tracks))
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--config", default=None, help="JSON simulation config")

    p = argparse.ArgumentParser(prog="fleetscan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a random instance")
    g.add_argument("--width", type=float, default=400.0)
    g.add_argument("--height", type=float, default=400.0)
    g.add_argument("--n", type=int, default=30)
    g.add_argument("--m", type=int, default=4)
    g.add_argument("--w", type=float, default=10.0)
    g.add_argument("--d-max", type=float, default=4.0)
    g.add_argument("--speed", type=float, default=4.0)
    g.add_argument("--battery", type=float, default=300e3)
    g.set_defaults(fn=cmd_gen)

    pl = sub.add_parser("plan", parents=[common], help="plan a mission")
    pl.add_argument("instance")
    pl.add_argument("--algo", choices=("psa", "greedy"), default="psa")
    pl.add_argument("--spacing", type=float, default=None, help="lane spacing (default w)")
    pl.add_argument("--eps-cov", type=float, default=0.5)
    pl.set_defaults(fn=cmd_plan)

    v = sub.add_parser("validate", parents=[common], help="check a plan against the constraints")
    v.add_argument("instance")
    v.add_argument("plan")
    v.add_argument("--eps-cov", type=float, default=0.5)
    v.set_defaults(fn=cmd_validate)

    s = sub.add_parser("simulate", parents=[common], help="fly a plan in the simulator")
    s.add_argument("instance")
    s.add_argument("plan")
    s.add_argument("--models", default=None, help="fitted energy model JSON")
    s.add_argument("--eps-cov", type=float, default=0.5)
    s.set_defaults(fn=cmd_simulate, out="sim_out")

    b = sub.add_parser("bench", parents=[common], help="sweep n or m over random instances")
    b.add_argument("--sweep", choices=("n", "m"), default="n")
    b.add_argument("--values", default="10,20,30,40")
    b.add_argument("--reps", type=int, default=50)
    b.add_argument("--n", type=int, default=30)
    b.add_argument("--m", type=int, default=4)
    b.add_argument("--w", type=float, default=10.0)
    b.add_argument("--size", type=float, default=400.0)
    b.add_argument("--d-max", type=float, default=4.0)
    b.set_defaults(fn=cmd_bench)

    e = sub.add_parser("energy", help="fit or apply the energy model")
    esub = e.add_subparsers(dest="energy_cmd", required=True)
    ef = esub.add_parser("fit", parents=[common], help="fit models from a training CSV")
    ef.add_argument("csv")
    ef.add_argument("--ridge", type=float, default=1e-3)
    ef.add_argument("--bandwidth", type=float, default=None)
    ef.set_defaults(fn=cmd_energy_fit, out="energy_model.json")
    ep = esub.add_parser("predict", parents=[common], help="predict energy for simulated flights")
    ep.add_argument("model")
    ep.add_argument("--t-sim", type=float, default=None)
    ep.add_argument("--d-sim", type=float, default=None)
    ep.add_argument("--csv", default=None)
    ep.add_argument("--battery", type=float, default=None, help="capacity in J for a feasibility check")
    ep.set_defaults(fn=cmd_energy_predict)

    r = sub.add_parser("render", parents=[common], help="draw an instance, plan and trace as SVG")
    r.add_argument("instance")
    r.add_argument("--plan", default=None)
    r.add_argument("--trace", default=None)
    r.set_defaults(fn=cmd_render, out="mission.svg")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd == "gen" and args.seed is None:
        args.seed = 0
    if args.cmd == "bench" and args.seed is None:
        args.seed = 0
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
