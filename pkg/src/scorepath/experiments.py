"""Ratio sweeps, trajectory metrics, the bang-bang baseline and file export."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ScorePathError
from .kinematics import CONVERGED, CRASHED, D_STAR, ControllerParams, SimConfig, Trajectory, simulate
from .score import ComposedScore, StateScore
from .sensor import Corridor, Perturbation, SensorMap
from .svg import PALETTE, SvgPlot


def default_ic_grid(d_star: float = D_STAR) -> list:
    """Eight corners and edges of a 3x3 grid plus one interior pad state."""
    ics = [(th, k * d_star) for th in (-0.6, 0.0, 0.6) for k in (-0.8, 0.0, 0.8) if not (th == 0 and k == 0)]
    ics.append((0.3, -0.4 * d_star))
    return ics


@dataclass
class SweepConfig:
    score: object  # a StateScore, or a dict understood by the caller's factory
    ratios: tuple = (0.2, 2.0, 20.0)
    gamma: float = 1.0
    alpha: float = 5e-5
    ic_grid: Optional[list] = None
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0
    perturbations: tuple = ()
    controller: Optional[Callable[[ControllerParams], Callable]] = None

    def __post_init__(self):
        if any(not r > 0 for r in self.ratios):
            raise ValueError("ratios must be positive")
        if self.ic_grid is None:
            self.ic_grid = default_ic_grid(self.sim.d_star)
        for th, d in self.ic_grid:
            if not (abs(th) < math.pi / 2 and abs(d) < self.sim.d_star):
                raise ValueError(f"initial state {(th, d)} outside the admissible region")

    def to_dict(self) -> dict:
        score = self.score.to_dict() if hasattr(self.score, "to_dict") else type(self.score).__name__
        return {"ratios": list(self.ratios), "gamma": self.gamma, "alpha": self.alpha,
                "ic_grid": [list(ic) for ic in self.ic_grid], "sim": self.sim.to_dict(), "seed": self.seed,
                "perturbations": [asdict(p) for p in self.perturbations], "score": score}


@dataclass
class TrajectoryMetrics:
    crashed: bool
    settling_time: Optional[float]
    settling_distance: Optional[float]
    max_abs_d: float
    overshoot_count: int
    final_score: float
    recovery_distance: Optional[float] = None


@dataclass(frozen=True)
class BangBangParams:
    gamma: float
    beta: float
    deadband: float = 0.0

    def __post_init__(self):
        if not self.deadband >= 0:
            raise ValueError("deadband must be >= 0")
        if not (self.gamma > 0 and self.beta > 0):
            raise ValueError("gamma and beta must be positive")


def bangbang_controller(params: BangBangParams) -> Callable[[float], tuple]:
    """Three-valued steering that turns the same way as ``omega = gamma*F``; speed is constant."""

    def control(score: float) -> tuple:
        if abs(score) <= params.deadband:
            return params.beta, 0.0
        return params.beta, math.copysign(params.gamma, score)

    return control


def sign_changes(x) -> int:
    """Sign flips of ``x`` with exact zeros skipped."""
    s = np.sign(np.asarray(x, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def first_abs_min(d) -> int:
    """Index where ``|d|`` first stops decreasing (the last index if it never does)."""
    a = np.abs(np.asarray(d, dtype=float))
    up = np.flatnonzero(a[1:] > a[:-1])
    return int(up[0]) if up.size else len(a) - 1


def overshoot_count(d) -> int:
    """Sign changes of ``d`` from the first ``|d|`` minimum on.

    Starts one sample early so a crossing straddling the minimum is counted.
    """
    m = first_abs_min(d)
    return sign_changes(np.asarray(d)[max(m - 1, 0):])


def _settling_index(traj: Trajectory, cfg: SimConfig) -> Optional[int]:
    if traj.event != CONVERGED:
        return None
    inside = (np.abs(traj.d) < cfg.conv_d) & (np.abs(traj.theta) < cfg.conv_theta)
    out = np.flatnonzero(~inside)
    return int(out[-1]) + 1 if out.size else 0


def _recovery_distance(traj: Trajectory, cfg: SimConfig, perturbations) -> Optional[float]:
    if not perturbations:
        return None
    s0 = min(p.s_start for p in perturbations)
    s_end = max(p.s_end for p in perturbations)
    if traj.s[-1] < s0:
        return None
    band = np.abs(traj.d) < cfg.conv_d
    after = np.flatnonzero(traj.s >= s0)
    off = after[~band[after]]
    if off.size == 0:
        return 0.0
    last_off = int(off[-1])
    if last_off == len(traj) - 1 or traj.event == CRASHED:
        return None
    return float(max(traj.s[last_off + 1], s_end) - s0)


def compute_metrics(traj: Trajectory, cfg: SimConfig = None, perturbations=()) -> TrajectoryMetrics:
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    cfg = cfg or SimConfig()
    k = _settling_index(traj, cfg)
    return TrajectoryMetrics(
        crashed=traj.event == CRASHED,
        settling_time=None if k is None else float(traj.t[k]),
        settling_distance=None if k is None else float(traj.s[k] - traj.s[0]),
        max_abs_d=float(np.max(np.abs(traj.d))),
        overshoot_count=overshoot_count(traj.d),
        final_score=float(abs(traj.F[-1])),
        recovery_distance=_recovery_distance(traj, cfg, perturbations),
    )


@dataclass
class SweepRecord:
    ratio: float
    ic_index: int
    ic: tuple
    trajectory: Optional[Trajectory]
    metrics: Optional[TrajectoryMetrics]
    error: Optional[str] = None

    @property
    def stem(self) -> str:
        return f"ratio_{self.ratio:g}_ic_{self.ic_index:02d}"


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


@dataclass
class SweepResult:
    config: SweepConfig
    records: list
    curve: object = None
    cones: object = None
    overlay_error: Optional[str] = None

    def by_ratio(self, ratio) -> list:
        return [r for r in self.records if r.ratio == ratio]

    def summary(self) -> dict:
        """Per-ratio aggregates; settling means average the converged runs only."""
        per = []
        for ratio in sorted({r.ratio for r in self.records}):
            recs = self.by_ratio(ratio)
            ms = [r.metrics for r in recs if r.metrics is not None]
            per.append({
                "ratio": ratio,
                "n": len(recs),
                "n_failed": sum(r.error is not None for r in recs),
                "n_crashed": sum(m.crashed for m in ms),
                "n_converged": sum(m.settling_time is not None for m in ms),
                "mean_settling_time": _mean([m.settling_time for m in ms]),
                "mean_settling_distance": _mean([m.settling_distance for m in ms]),
                "mean_max_abs_d": _mean([m.max_abs_d for m in ms]),
                "max_overshoot_count": max((m.overshoot_count for m in ms), default=0),
            })
        timed = [p for p in per if p["mean_settling_time"] is not None]
        order = [p["ratio"] for p in sorted(timed, key=lambda p: (p["mean_settling_time"], p["ratio"]))]
        return {"n_trajectories": len(self.records), "per_ratio": per, "ratios_by_settling_time": order}

    def to_dict(self) -> dict:
        recs = []
        for r in self.records:
            recs.append({"ratio": r.ratio, "ic_index": r.ic_index, "ic": list(r.ic),
                         "file": f"trajectories/{r.stem}.csv" if r.trajectory is not None else None,
                         "event": r.trajectory.event if r.trajectory is not None else None,
                         "metrics": asdict(r.metrics) if r.metrics is not None else None, "error": r.error})
        return {"config": self.config.to_dict(), "summary": self.summary(), "trajectories": recs}


def _with_perturbations(score, perturbations):
    if not perturbations:
        return score
    if not (isinstance(score, ComposedScore) and isinstance(score.sensor, SensorMap)):
        raise ValueError("perturbations need a sensor-composed score")
    old = score.sensor
    corridor = Corridor(old.corridor.width, tuple(perturbations))
    return ComposedScore(score.sebsf, SensorMap(corridor, old.cfg, old.seed))


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """One trajectory per (ratio, IC); failures are recorded and the sweep carries on."""
    score = _with_perturbations(cfg.score, cfg.perturbations)
    records = []
    for ratio in sorted(cfg.ratios):
        params = ControllerParams(cfg.alpha, ratio * cfg.gamma, cfg.gamma)
        ctrl = cfg.controller(params) if cfg.controller is not None else None
        for i, ic in enumerate(cfg.ic_grid):
            try:
                tr = simulate(ic, score, params, cfg.sim, controller=ctrl)
                rec = SweepRecord(ratio, i, tuple(ic), tr, compute_metrics(tr, cfg.sim, cfg.perturbations))
            except (ScorePathError, ValueError, FloatingPointError) as exc:
                rec = SweepRecord(ratio, i, tuple(ic), None, None, f"{type(exc).__name__}: {exc}")
            records.append(rec)
    result = SweepResult(cfg, records)
    _attach_overlays(result, score)
    return result


def _attach_overlays(result: SweepResult, score) -> None:
    from .analysis import AnalysisConfig, ConePair, slope_bounds, solve_implicit_curve

    if not isinstance(score, StateScore):
        return
    d_cap = result.config.sim.d_star
    if isinstance(score, ComposedScore) and isinstance(score.sensor, SensorMap):
        d_cap = min(d_cap, 0.9 * score.sensor.corridor.w_half)
    acfg = AnalysisConfig(n_curve=121, d_cap=d_cap)
    try:
        result.curve = solve_implicit_curve(score, acfg.theta_grid, acfg.tol, d_cap)
        b = slope_bounds(result.curve, acfg.margin, acfg.rel_margin)
        result.cones = ConePair(b.L_inner, b.L_outer, d_cap)
    except ScorePathError as exc:
        result.overlay_error = f"{type(exc).__name__}: {exc}"


def _state_space_svg(result: SweepResult) -> SvgPlot:
    d_star = result.config.sim.d_star
    plot = SvgPlot((-math.pi / 2, math.pi / 2), (-d_star, d_star), title="state space",
                   xlabel="theta [rad]", ylabel="d [m]")
    ratios = sorted({r.ratio for r in result.records})
    for r in result.records:
        if r.trajectory is not None:
            color = PALETTE[ratios.index(r.ratio) % len(PALETTE)]
            plot.line(r.trajectory.theta, r.trajectory.d, color, 1.0, label=f"beta/gamma = {r.ratio:g}")
    if result.cones is not None:
        th = np.linspace(-math.pi / 2, math.pi / 2, 3)
        for L, dash in ((result.cones.L_inner, "6,3"), (result.cones.L_outer, "2,3")):
            plot.line(th, -L * th, "#555", 1.0, dash)
    if result.curve is not None:
        plot.line(result.curve.thetas, result.curve.d_values, "#000", 2.0, label="F = 0")
    return plot


def _top_down_svg(result: SweepResult) -> SvgPlot:
    d_star = result.config.sim.d_star
    s_max = max((float(np.nanmax(r.trajectory.s)) for r in result.records if r.trajectory is not None),
                default=1.0)
    plot = SvgPlot((0.0, max(s_max, 1e-3)), (-1.1 * d_star, 1.1 * d_star), title="top-down",
                   xlabel="s [m]", ylabel="d [m]")
    plot.line([0, s_max], [d_star, d_star], "#444", 1.5)
    plot.line([0, s_max], [-d_star, -d_star], "#444", 1.5)
    ratios = sorted({r.ratio for r in result.records})
    for r in result.records:
        tr = r.trajectory
        if tr is None:
            continue
        color = PALETTE[ratios.index(r.ratio) % len(PALETTE)]
        plot.line(tr.s, tr.d, color, 1.0, label=f"beta/gamma = {r.ratio:g}")
        if tr.event == CRASHED:
            plot.cross(tr.s[-1], tr.d[-1], color)
    return plot


def export(result: SweepResult, fmt: str, path) -> list:
    """Write one format into directory ``path``; returns the files written."""
    out = Path(path)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            recs = [r for r in result.records if r.trajectory is not None]
            if recs:
                (out / "trajectories").mkdir(exist_ok=True)
            for r in recs:
                p = out / "trajectories" / f"{r.stem}.csv"
                r.trajectory.to_csv(p)
                written.append(p)
        elif fmt == "json":
            p = out / "summary.json"
            p.write_text(json.dumps(result.to_dict(), indent=2) + "\n")
            written.append(p)
        elif fmt == "svg":
            for name, plot in (("state_space.svg", _state_space_svg(result)), ("top_down.svg", _top_down_svg(result))):
                plot.save(out / name)
                written.append(out / name)
        else:
            raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"export to {out} failed: {exc}") from exc
    return written


def export_all(result: SweepResult, path) -> list:
    return [p for fmt in ("csv", "json", "svg") for p in export(result, fmt, path)]


def sweep_from_dict(cfg: dict, score) -> SweepConfig:
    sim = SimConfig.from_dict(cfg.get("sim", {}))
    perts = tuple(Perturbation(**p) for p in cfg.get("perturbations", ()))
    ic = cfg.get("ic_grid")
    ctrl = None
    if cfg.get("controller", "smooth") == "bangbang":
        dead = float(cfg.get("deadband", 0.0))
        ctrl = lambda p: bangbang_controller(BangBangParams(p.gamma, p.beta, dead))
    return SweepConfig(score, tuple(cfg.get("ratios", (0.2, 2.0, 20.0))), cfg.get("gamma", 1.0),
                       cfg.get("alpha", 5e-5), None if ic is None else [tuple(x) for x in ic], sim,
                       cfg.get("seed", 0), perts, ctrl)
