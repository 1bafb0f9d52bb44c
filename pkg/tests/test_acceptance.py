"""End-to-end acceptance checks; each prints one PASS/FAIL line with its runtime."""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from scorepath.analysis import (build_cones, certify_invariance, certify_lyapunov, compute_delta,
                                finite_time_entry, numeric_ratio_bound, recommend_params, slope_bounds,
                                solve_implicit_curve)
from scorepath.experiments import SweepConfig, run_sweep
from scorepath.kinematics import D_STAR, ControllerParams, State, dynamics_rhs, step_rk4
from scorepath.score import AffineStBSF
from scorepath.verify import VerifyGrid, check_conditions, estimate_partials

UNIT = AffineStBSF()


def report(n, ok, detail, t0):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - t0:.2f} s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_affine_curve():
    t0 = time.perf_counter()
    curve = solve_implicit_curve(UNIT, np.linspace(-1.2, 1.2, 241), tol=1e-9)
    err = float(np.max(np.abs(curve.d_values + curve.thetas)))
    slope_err = float(np.max(np.abs(curve.slopes + 1)))
    dt = time.perf_counter() - t0
    ok = len(curve) == 241 and err <= 1e-8 and slope_err <= 1e-8 and dt < 1.0
    report(1, ok, f"max|h+theta|={err:.1e} max|h'+1|={slope_err:.1e}", t0)


def test_criterion_2_delta_bound():
    t0 = time.perf_counter()
    bounds = slope_bounds(solve_implicit_curve(UNIT, np.linspace(-1.2, 1.2, 241)), margin=0.1)
    delta = compute_delta(UNIT, bounds.L_inner)
    closed = 0.9 * (0.9 * -1.0 - -1.0)
    numeric = numeric_ratio_bound(UNIT, 0.0, bounds.L_inner, np.geomspace(1e-3, 1.2, 64))
    ok = (abs(bounds.L_inner - 0.9) <= 1e-12 and abs(delta - 0.09) <= 1e-12 and delta == closed
          and abs(numeric - delta) / delta <= 0.01)
    report(2, ok, f"L_inner={bounds.L_inner:.12g} delta={delta:.12g} numeric={numeric:.8g}", t0)


def test_criterion_3_certificate_soundness():
    t0 = time.perf_counter()
    cones = build_cones(UNIT)[2]
    good = certify_invariance(UNIT, ControllerParams(0.0, 0.045, 1.0), cones)
    bad = certify_invariance(UNIT, ControllerParams(0.0, 0.18, 1.0), cones)
    fails = [c for c in bad if not c.passed]
    near_zero = bool(fails) and all(c.segment.endswith("inner") for c in fails) \
        and min(abs(c.theta) for c in fails) <= 1e-2
    dt = time.perf_counter() - t0
    ok = all(c.passed for c in good) and near_zero and dt < 5.0
    report(3, ok, f"0.045 pass={all(c.passed for c in good)} 0.18 inner failures={len(fails)}", t0)


def test_criterion_4_lyapunov():
    t0 = time.perf_counter()
    failures = 0
    for fam, params in ((UNIT, ControllerParams(5e-5, 0.045, 1.0)),
                        (AffineStBSF(1.0, 1.0, 0.5), recommend_params(AffineStBSF(1.0, 1.0, 0.5), 1.0, 5e-5, 0.5))):
        cones = build_cones(fam)[2]
        assert all(c.passed for c in certify_invariance(fam, params, cones))
        checks = certify_lyapunov(fam, params, cones, n_interior=500, r0=1e-3)
        assert len(checks) == 500
        failures += sum(not c.passed for c in checks)
    report(4, failures == 0, f"failures={failures} of 1000 samples", t0)


def test_criterion_5_finite_time_entry():
    t0 = time.perf_counter()
    params = ControllerParams(5e-5, 0.045, 1.0)
    cones = build_cones(UNIT)[2]
    ics = [(th, d) for th in np.linspace(-1.0, 1.0, 5) for d in np.linspace(-0.9 * D_STAR, 0.9 * D_STAR, 5)]
    res = finite_time_entry(UNIT, params, cones, ics, t_max=60.0)
    entered = sum(r.finite and r.entry_time < 60.0 for r in res)
    worst = min((r.min_slack_after for r in res if r.min_slack_after is not None), default=0.0)
    ok = entered == 25 and worst >= -1e-6
    report(5, ok, f"entered={entered}/25 max_entry={max(r.entry_time for r in res):.2f}s "
                  f"min_post_slack={worst:.2e}", t0)


@pytest.fixture(scope="module")
def svm_sweep(trained):
    t0 = time.perf_counter()
    res = run_sweep(SweepConfig(trained.score, ratios=(0.2, 2.0, 20.0), gamma=1.0, alpha=5e-5))
    return res, time.perf_counter() - t0


def test_criterion_6_sweep(svm_sweep):
    t0 = time.perf_counter()
    res, runtime = svm_sweep
    per = {p["ratio"]: p for p in res.summary()["per_ratio"]}
    times = [per[r]["mean_settling_time"] for r in (0.2, 2.0, 20.0)]
    dists = [per[r]["mean_settling_distance"] for r in (0.2, 2.0, 20.0)]
    increasing = all(a is not None and b is not None and a < b for a, b in zip(times, times[1:]))
    r20 = [r.metrics for r in res.by_ratio(20.0)]
    unsettled = any(m.crashed or m.overshoot_count >= 3 for m in r20)
    ok = increasing and per[0.2]["n_crashed"] == 0 and unsettled and runtime < 120
    detail = (f"mean settling time [s] {[round(t, 3) for t in times]} (increasing={increasing}); "
              f"crashes@0.2={per[0.2]['n_crashed']} crashes@20={per[20.0]['n_crashed']}; "
              f"mean settling distance [m] {[round(d, 2) for d in dists]}; sweep {runtime:.1f} s")
    report(6, ok, detail, t0 - runtime)


def test_criterion_7_svm_region(trained):
    t0 = time.perf_counter()
    fld = estimate_partials(trained.score, VerifyGrid())
    rep = check_conditions(fld, strictness=0.0)
    ok = rep.region_size >= 25 and bool(rep.region[rep.origin_node])
    report(7, ok, f"region_size={rep.region_size} contains_origin_node={bool(rep.region[rep.origin_node])}", t0)


def test_criterion_8_svm_steady_state(trained, svm_sweep):
    t0 = time.perf_counter()
    res, _ = svm_sweep
    fld = estimate_partials(trained.score, VerifyGrid())
    bound = 0.05 * float(np.median(np.abs(fld.f)))
    conv = [r for r in res.records if r.metrics is not None and r.metrics.settling_time is not None]
    worst = max(r.metrics.final_score for r in conv)
    final_d = max(abs(r.trajectory.d[-1]) for r in conv)
    ok = bool(conv) and worst <= bound
    report(8, ok, f"converged={len(conv)} max|F_end|={worst:.4f} bound={bound:.4f} max|d_end|={final_d:.3f}", t0)


def _arc_error(dt, T=2.0):
    th0, d0, v, w = 0.3, 0.1, 1.0, 0.7
    x = State(th0, d0, 0.0)
    for _ in range(int(round(T / dt))):
        x = step_rk4(x, lambda s: dynamics_rhs(s, v, w), dt)
    return abs(x.d - (d0 + (v / w) * (math.cos(th0) - math.cos(th0 + w * T))))


def _fd_error(n):
    fam = AffineStBSF(1.0, 1.0, 0.5)
    fld = estimate_partials(fam, VerifyGrid(theta_max=0.8, d_max=0.8, n_theta=n, n_d=n))
    i = int(np.argmin(np.abs(fld.thetas - 0.4)))
    return abs(fld.df_dtheta[i, n // 2] - fam.partials(0.4, 0.0)[0])


def test_criterion_9_numerics():
    t0 = time.perf_counter()
    order = math.log2(_arc_error(0.1) / _arc_error(0.05))
    e = [_fd_error(n) for n in (9, 17, 33)]
    halving, quartering = e[0] / e[1], e[0] / e[2]
    ok = order >= 3.5 and halving >= 3.5 and quartering >= 3.5
    report(9, ok, f"rk4 order={order:.2f} fd ratio h/2={halving:.2f} h/4={quartering:.2f}", t0)


def _pipeline(out, cfg):
    cmd = [sys.executable, "-m", "scorepath.cli", "--seed", "7"]
    c = ["--config", str(cfg)]
    subprocess.run(cmd + ["dataset", *c, "--out", str(out / "data")], check=True, capture_output=True)
    subprocess.run(cmd + ["train", *c, "--dataset", str(out / "data" / "dataset.csv"), "--out", str(out)],
                   check=True, capture_output=True)
    model = str(out / "model.json")
    subprocess.run(cmd + ["certify", *c, "--score", model, "--out", str(out / "cert.json")], check=True,
                   capture_output=True)
    subprocess.run(cmd + ["sweep", *c, "--score", model, "--out", str(out / "sweep")], check=True,
                   capture_output=True)


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"svm": {"epochs": 30}}))
    for run in ("a", "b"):
        _pipeline(tmp_path / run, cfg)
    a, b = tmp_path / "a", tmp_path / "b"
    files = ["model.json", "cert.json"] + sorted(
        str(p.relative_to(a)) for p in (a / "sweep" / "trajectories").glob("*.csv"))
    same = [(a / f).read_bytes() == (b / f).read_bytes() for f in files]
    ok = len(files) == 29 and all(same)
    report(10, ok, f"{sum(same)}/{len(files)} files identical (model, certificate, 27 trajectories)", t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
