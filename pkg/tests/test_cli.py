import json
import math

import numpy as np
import pytest

from fleetscan.cli import BenchSpec, bench_csv, main, run_bench
from fleetscan.energy import synthetic_field, write_training_csv
from fleetscan.model import FleetConfig, Instance, generate_instance, save_instance
from fleetscan.planner import psa_plan, greedy_plan


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def field_files(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    plan = tmp_path / "plan.json"
    assert run(capsys, "gen", "--width", 120, "--height", 120, "--n", 30, "--m", 3, "--seed", 2,
               "--out", inst)[0] == 0
    assert run(capsys, "plan", inst, "--spacing", 9, "--eps-cov", 0.2, "--out", plan)[0] == 0
    return inst, plan


def test_gen_is_byte_stable(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(capsys, "gen", "--n", 30, "--width", 120, "--height", 120, "--seed", 9, "--out", p)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    pts = json.loads(a.read_text())["targets"]
    assert len(pts) == 30 and all(0 <= x <= 120 and 0 <= y <= 120 for x, y in pts)


def test_gen_bad_dimensions(capsys):
    code, _, err = run(capsys, "gen", "--width", -5)
    assert code == 2 and "error" in err
    assert run(capsys, "gen", "--n", 0)[0] == 2


def test_generated_points_are_uniform():
    n, W, H = 10_000, 400.0, 300.0
    inst = generate_instance(W, H, n, FleetConfig(4, 10.0, 4.0), seed=123)
    xy = np.array(inst.targets)
    for k, size in ((0, W), (1, H)):
        sigma = size / math.sqrt(12) / math.sqrt(n)
        assert abs(xy[:, k].mean() - size / 2) < 3 * sigma


def test_plan_table_square_corners(tmp_path, capsys, square_corners):
    save_instance(square_corners, tmp_path / "sq.json")
    code, out, _ = run(capsys, "plan", tmp_path / "sq.json", "--out", tmp_path / "p.json")
    assert code == 0
    assert "L_fleet  400.000000" in out and "LB       400.000000" in out and "L_adjust 0.000000" in out
    assert (tmp_path / "p.json").exists()


def test_plan_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "plan", tmp_path / "nope.json")
    assert code == 2 and "cannot read" in err


@pytest.mark.parametrize("algo", ["psa", "greedy"])
def test_plan_then_validate(tmp_path, capsys, algo):
    inst = tmp_path / "i.json"
    run(capsys, "gen", "--n", 25, "--seed", 4, "--out", inst)
    code, _, _ = run(capsys, "plan", inst, "--algo", algo, "--out", tmp_path / "p.json")
    assert code == 0
    code, out, _ = run(capsys, "validate", inst, tmp_path / "p.json")
    assert code == 0 and out.strip().endswith("clean")


def test_validate_reports_dropped_waypoint(tmp_path, capsys, field_files):
    inst, plan = field_files
    obj = json.loads(plan.read_text())
    # drop the formation at the middle waypoint; some target loses its pass
    for k in range(len(obj["waypoints"][0]) - 2, 0, -1):
        edited = json.loads(plan.read_text())
        for wp in edited["waypoints"]:
            del wp[k]
        (tmp_path / "bad.json").write_text(json.dumps(edited))
        code, out, _ = run(capsys, "validate", inst, tmp_path / "bad.json", "--eps-cov", 0.2)
        if "coverage target" in out:
            break
    assert code == 1 and "coverage target=" in out


def test_validate_wrong_fleet(tmp_path, capsys, field_files):
    inst, plan = field_files
    obj = json.loads(inst.read_text())
    obj["fleet"]["m"] = 5
    (tmp_path / "i5.json").write_text(json.dumps(obj))
    code, _, err = run(capsys, "validate", tmp_path / "i5.json", plan)
    assert code == 1 and "UAVs" in err


def test_simulate_writes_outputs(tmp_path, capsys, field_files):
    inst, plan = field_files
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert run(capsys, "simulate", inst, plan, "--seed", 3, "--out", out1, "--eps-cov", 0.2)[0] == 0
    assert run(capsys, "simulate", inst, plan, "--seed", 3, "--out", out2, "--eps-cov", 0.2)[0] == 0
    for name in ("trace.ndjson", "summary.json", "mission.svg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["uncovered"] == [] and summary["connectivity_violation_ticks"] == 0
    assert {"t", "d", "energy", "violations"} <= set(summary["uavs"][0])
    assert (out1 / "mission.svg").read_text().startswith("<svg")


def test_simulate_noiseless_paths_coincide(tmp_path, capsys, field_files):
    inst, plan = field_files
    cfg = tmp_path / "quiet.json"
    cfg.write_text(json.dumps({"wind_sigma": 0, "gps_sigma": 0}))
    out = tmp_path / "q"
    assert run(capsys, "simulate", inst, plan, "--config", cfg, "--out", out, "--eps-cov", 0.2)[0] == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["fleet_distance"] == pytest.approx(s["plan_fleet_cost"], rel=1e-3)


def test_simulate_bad_config(tmp_path, capsys, field_files):
    inst, plan = field_files
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dt": -1}))
    assert run(capsys, "simulate", inst, plan, "--config", cfg)[0] == 2


def test_bench_single_rep_echoes_instance(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--sweep", "n", "--values", "12", "--reps", 1, "--seed", 5,
                       "--out", tmp_path)
    assert code == 0
    header, row = out.strip().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    inst = generate_instance(400, 400, 12, FleetConfig(4, 10.0, 4.0), 5)
    assert float(vals["psa_mean"]) == pytest.approx(psa_plan(inst).report.fleet_cost, abs=1e-6)
    assert float(vals["greedy_mean"]) == pytest.approx(greedy_plan(inst).report.fleet_cost, abs=1e-6)
    assert float(vals["psa_std"]) == 0.0
    assert (tmp_path / "bench.csv").read_text() == out
    assert (tmp_path / "bench.svg").exists()


def test_bench_is_deterministic():
    spec = BenchSpec("m", [2, 4], repetitions=3, n=15)
    assert bench_csv(run_bench(spec)) == bench_csv(run_bench(spec))
    with pytest.raises(ValueError):
        BenchSpec("n", [], 3)
    with pytest.raises(ValueError):
        BenchSpec("n", [10], 0)


def test_energy_fit_and_predict(tmp_path, capsys):
    rows = []
    for t, v in zip(np.linspace(60, 600, 10), np.linspace(1.2, 1.8, 10)[::-1]):
        d = v * t
        rows.append((t, d, 0.97 * t + 2, 1.1 * d - 3, 380 * t + 20 * d))
    csv = tmp_path / "train.csv"
    write_training_csv(rows, csv)
    model = tmp_path / "m.json"
    code, _, _ = run(capsys, "energy", "fit", csv, "--ridge", 1e-12, "--out", model)
    assert code == 0
    t, d, *_, e = rows[3]
    code, out, _ = run(capsys, "energy", "predict", model, "--t-sim", t, "--d-sim", d)
    assert code == 0
    pred = float(out.strip().splitlines()[1].split(",")[2])
    assert pred == pytest.approx(e, rel=1e-4)
    code, _, err = run(capsys, "energy", "predict", model, "--t-sim", t, "--d-sim", d, "--battery", 1000)
    assert code == 1 and "infeasible" in err


def test_energy_synthetic_benchmark(tmp_path, capsys):
    field = synthetic_field(seed=1)
    csv = tmp_path / "field.csv"
    write_training_csv(field.train_rows, csv)
    assert run(capsys, "energy", "fit", csv, "--out", tmp_path / "m.json")[0] == 0
    test_rows = [(ts, ds, None, None, None) for ts, ds in field.test_sim]
    pred_csv = tmp_path / "test.csv"
    pred_csv.write_text("t_sim_s,d_sim_m,t_real_s,d_real_m,energy_j\n" + "".join(
        f"{ts:.6f},{ds:.6f},0,0,{e:.6f}\n" for (ts, ds, *_), e in zip(test_rows, field.test_energy)))
    code, out, _ = run(capsys, "energy", "predict", tmp_path / "m.json", "--csv", pred_csv)
    assert code == 0
    lines = out.strip().splitlines()[1:]
    errs = [abs(float(p) - float(e)) / float(e) for _, _, p, e in (ln.split(",") for ln in lines)]
    assert len(errs) == len(field.test_energy) and np.mean(errs) <= 0.06


def test_energy_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t_sim_s,d_sim_m,t_real_s,energy_j\n1,2,3,4\n")
    code, _, err = run(capsys, "energy", "fit", bad, "--out", tmp_path / "m.json")
    assert code == 2 and "'d_real_m'" in err


def test_render(tmp_path, capsys, field_files):
    inst, plan = field_files
    assert run(capsys, "simulate", inst, plan, "--out", tmp_path / "s", "--eps-cov", 0.2)[0] == 0
    out = tmp_path / "r.svg"
    code, _, _ = run(capsys, "render", inst, "--plan", plan, "--trace", tmp_path / "s" / "trace.ndjson",
                     "--out", out)
    assert code == 0 and out.read_text().count("<polyline") >= 6
