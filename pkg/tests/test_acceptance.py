"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import itertools
import random
import time

import numpy as np
import pytest

from fleetscan.cli import BenchSpec, run_bench
from fleetscan.energy import fit_models, mean_relative_error, synthetic_field, write_training_csv
from fleetscan.geometry import ConvexPolygon, Point, convex_hull
from fleetscan.model import FleetConfig, generate_instance, validate
from fleetscan.planner import RingRegion, greedy_plan, psa_plan, scan_groups
from fleetscan.protocol import ProtocolError, decode, encode
from fleetscan.simulator import SimConfig, run_mission
from oracles import (
    brute_hull_vertices,
    check_barrier_log,
    field_instance,
    malformed_lines,
    random_packet,
    run_barrier_schedule,
    sweep_excursion,
)

# reference sweep means (w=10, 400 x 400 area; n-sweep at m=4, m-sweep at n=30)
REFERENCE_N_SWEEP = {10: 1019.266, 20: 2116.791, 30: 2733.867, 40: 3269.500}
REFERENCE_M_SWEEP = {2: 3523.731, 4: 2733.867, 6: 2302.524}


def verdict(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance] {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def sampled_instances(count, seed):
    rng = np.random.default_rng(seed)
    for i in range(count):
        n, m = int(rng.integers(10, 41)), int(rng.integers(2, 7))
        yield generate_instance(400.0, 400.0, n, FleetConfig(m, 10.0, 4.0), seed=i)


def test_criterion_1_ledger(capsys):
    t0 = time.perf_counter()
    worst, below = 0.0, True
    for inst in sampled_instances(200, 1):
        r = psa_plan(inst).report
        worst = max(worst, abs(r.fleet_cost - r.lower_bound - r.adjust))
        below &= r.lower_bound <= r.fleet_cost + 1e-6
    dt = time.perf_counter() - t0
    verdict(capsys, "criterion 1 ledger identity", worst < 1e-6 and below and dt < 30,
            f"max |L - LB - L_adjust| = {worst:.2e}, LB <= L on all: {below}, {dt:.1f} s")


def test_criterion_2_constraints(capsys):
    t0 = time.perf_counter()
    bad = []
    for inst in sampled_instances(100, 2):
        for plan in (psa_plan(inst), greedy_plan(inst)):
            rep = validate(plan.trajectories(inst.fleet), inst, plan.eps_cov)
            if any(rep.values()):
                bad.append((inst.seed, plan.algo, {k: len(v) for k, v in rep.items()}))
    dt = time.perf_counter() - t0
    verdict(capsys, "criterion 2 constraint soundness", not bad and dt < 60,
            f"{len(bad)} plans with violations out of 200, {dt:.1f} s")


def _line_ring(depths_m):
    outer = ConvexPolygon((Point(0, 0), Point(1000, 0), Point(1000, 1000), Point(0, 1000)))
    pts = tuple(outer.vertices) + tuple(Point(500, d) for d in depths_m)
    return RingRegion(1, outer, None, pts)


def test_criterion_3_geometry(capsys):
    rng = random.Random(3)
    hull_bad = 0
    for _ in range(1000):
        n = rng.randint(1, 12)
        span = rng.choice([3, 6, 50])
        pts = [(rng.randint(-span, span), rng.randint(-span, span)) for _ in range(n)]
        if set(map(tuple, convex_hull(pts).vertices)) != brute_hull_vertices(pts):
            hull_bad += 1
    # eps sits half a millimeter off the grid so no depth lands on the snap threshold
    eps_mm = 499.5
    exc_bad = 0
    for _ in range(500):
        w_mm = rng.randint(2_000, 20_000)
        depths = sorted({rng.randint(1, 400_000) for _ in range(rng.randint(1, 6))})
        want = sweep_excursion(depths, w_mm, eps_mm, lanes=400_000 // w_mm + 2)
        groups = scan_groups(_line_ring([d / 1000 for d in depths]), w_mm / 1000, eps_mm / 1000)
        got = max(g.excursion for g in groups)
        if round(got * 1000) != want:
            exc_bad += 1
    verdict(capsys, "criterion 3 geometry oracles", hull_bad == 0 and exc_bad == 0,
            f"hull mismatches {hull_bad}/1000, excursion mismatches {exc_bad}/500")


def test_criterion_4_protocol(capsys):
    t0 = time.perf_counter()
    orders = set(itertools.permutations([0, 0, 0, 1, 1, 1, 2, 2, 2]))
    for order in orders:
        log, _ = run_barrier_schedule(3, 3, order)
        assert sorted(check_barrier_log(3, log)) == [0, 1, 2]
    rng = random.Random(4)
    base = [a for a in range(5) for _ in range(10)]
    for _ in range(10_000):
        order = base[:]
        rng.shuffle(order)
        dups = {i for i in range(len(order)) if rng.random() < 0.1}
        log, _ = run_barrier_schedule(5, 10, order, dups)
        assert sorted(check_barrier_log(5, log)) == list(range(10))
    trips = rejects = 0
    for _ in range(10_000):
        p = random_packet(rng)
        line = encode(p)
        q = decode(line)
        assert q == p and encode(q) == line
        trips += 1
    for _ in range(300):
        for bad in malformed_lines(rng, encode(random_packet(rng))):
            with pytest.raises(ProtocolError):
                decode(bad)
            rejects += 1
    dt = time.perf_counter() - t0
    verdict(capsys, "criterion 4 protocol", dt < 30,
            f"{len(orders)} exhaustive schedules, 10000 random schedules, {trips} round trips, "
            f"{rejects} malformed lines rejected, {dt:.1f} s")


@pytest.fixture(scope="module")
def sweeps():
    t0 = time.perf_counter()
    n_rows = run_bench(BenchSpec("n", [10, 20, 30, 40], repetitions=50, m=4))
    m_rows = run_bench(BenchSpec("m", [2, 4, 6], repetitions=50, n=30))
    return n_rows, m_rows, time.perf_counter() - t0


def _series(rows, key):
    return {r["value"]: r[f"{key}_mean"] for r in rows}


def test_criterion_5a_decreasing_in_m(capsys, sweeps):
    _, m_rows, dt = sweeps
    psa = _series(m_rows, "psa")
    vals = [psa[m] for m in (2, 4, 6)]
    ok = vals[0] > vals[1] > vals[2] and dt < 300
    verdict(capsys, "criterion 5(a) PSA decreasing in m", ok,
            "means " + ", ".join(f"m={m}: {psa[m]:.1f} (ref {REFERENCE_M_SWEEP[m]:.1f})" for m in psa)
            + f", sweeps took {dt:.1f} s")


def test_criterion_5b_increasing_in_n(capsys, sweeps):
    n_rows, _, _ = sweeps
    psa = _series(n_rows, "psa")
    vals = [psa[n] for n in (10, 20, 30, 40)]
    verdict(capsys, "criterion 5(b) PSA increasing in n", all(a < b for a, b in zip(vals, vals[1:])),
            "means " + ", ".join(f"n={n}: {v:.1f}" for n, v in psa.items()))


def test_criterion_5c_psa_below_greedy(capsys, sweeps):
    n_rows, m_rows, _ = sweeps
    pairs = [(f"n={r['value']}", r["psa_mean"], r["greedy_mean"]) for r in n_rows]
    pairs += [(f"m={r['value']}", r["psa_mean"], r["greedy_mean"]) for r in m_rows]
    ok = all(p < g for _, p, g in pairs)
    verdict(capsys, "criterion 5(c) PSA below Greedy", ok,
            ", ".join(f"{k}: psa {p:.1f} vs greedy {g:.1f}" for k, p, g in pairs))


def test_criterion_5d_near_reference(capsys, sweeps):
    n_rows, _, _ = sweeps
    psa = _series(n_rows, "psa")
    rel = {n: psa[n] / ref - 1 for n, ref in REFERENCE_N_SWEEP.items()}
    ok = all(abs(r) <= 0.25 for r in rel.values())
    verdict(capsys, "criterion 5(d) PSA within 25% of reference", ok,
            ", ".join(f"n={n}: {psa[n]:.1f} vs {REFERENCE_N_SWEEP[n]:.1f} ({rel[n]:+.1%})" for n in rel))


def test_criterion_6_energy(capsys):
    t0 = time.perf_counter()
    errs = []
    for seed in range(10):
        field = synthetic_field(seed=seed)
        models = fit_models(write_training_csv(field.train_rows))
        errs.append(mean_relative_error(models, field))
    dt = time.perf_counter() - t0
    mean = float(np.mean(errs))
    verdict(capsys, "criterion 6 energy accuracy", mean <= 0.06 and dt < 10,
            f"mean relative error {mean:.2%} over 10 field sets (worst {max(errs):.2%}), {dt:.1f} s")


CRIT7_SEED = 7


def _field_run():
    inst = field_instance(CRIT7_SEED)
    plan = psa_plan(inst, spacing=9.0, eps_cov=0.2)
    return inst, plan, run_mission(inst, plan, config=SimConfig(seed=CRIT7_SEED))


def test_criterion_7_field_task(capsys):
    t0 = time.perf_counter()
    inst, plan, trace = _field_run()
    dt = time.perf_counter() - t0
    s = trace.summary
    gap = abs(s["fleet_distance"] / plan.report.fleet_cost - 1)
    ok = (s["completed"] and s["covered"] == s["targets"] and s["connectivity_violation_ticks"] == 0
          and gap <= 0.05 and dt < 20)
    verdict(capsys, "criterion 7 field task", ok,
            f"covered {s['covered']}/{s['targets']}, connectivity violations {s['connectivity_violation_ticks']}, "
            f"sim {s['fleet_distance']:.1f} m vs plan {plan.report.fleet_cost:.1f} m ({gap:.2%}), {dt:.1f} s")


def test_criterion_8_determinism(capsys):
    a = _field_run()[2]
    b = _field_run()[2]
    same = a.to_ndjson().encode() == b.to_ndjson().encode() and a.summary_json() == b.summary_json()
    verdict(capsys, "criterion 8 determinism", same, f"{len(a.records)} trace records compared byte for byte")
