"""Constructive stability certificate for the score-driven controller on a straight path.

The zero set of F is traced as ``d = h(theta)``, sandwiched between two lines through
the origin, and the closed-loop field is checked on the boundary of the resulting cones.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (DegenerateSlopes, NegativeRatioSample, NoBracket, NonPositiveDelta, ScorePathError)
from .kinematics import D_STAR, ControllerParams, SimConfig, simulate

THETA_CAP = math.pi / 2 - 1e-9


@dataclass
class ImplicitCurve:
    thetas: np.ndarray
    d_values: np.ndarray
    slopes: np.ndarray
    residuals: np.ndarray
    tol: float
    dropped: list = field(default_factory=list)

    @property
    def domain(self) -> tuple:
        return float(self.thetas[0]), float(self.thetas[-1])

    def __len__(self):
        return len(self.thetas)

    def h_at_zero(self) -> Optional[float]:
        hit = np.flatnonzero(self.thetas == 0.0)
        return float(self.d_values[hit[0]]) if hit.size else None

    def invariants(self) -> dict:
        nz = self.thetas != 0
        return {
            "residual_within_tol": bool(np.all(np.abs(self.residuals) <= self.tol)),
            "slopes_negative_finite": bool(np.all(np.isfinite(self.slopes)) and np.all(self.slopes < 0)),
            "strictly_decreasing": bool(np.all(np.diff(self.d_values) < 0)),
            "opposite_signs": bool(np.all(self.thetas[nz] * self.d_values[nz] < 0)),
        }

    def to_dict(self) -> dict:
        return {"theta": self.thetas.tolist(), "h": self.d_values.tolist(), "h_prime": self.slopes.tolist(),
                "residual": self.residuals.tolist(), "tol": self.tol, "domain": list(self.domain),
                "dropped_theta": [float(t) for t in self.dropped], "invariants": self.invariants()}


def _partials(stbsf, theta, d, step=1e-6):
    if getattr(stbsf, "has_exact_partials", False):
        return stbsf.partials(theta, d)
    ft = (stbsf(theta + step, d) - stbsf(theta - step, d)) / (2 * step)
    fd = (stbsf(theta, d + step) - stbsf(theta, d - step)) / (2 * step)
    return ft, fd


def _bisect_root(f, lo, hi, tol, max_iter=200):
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return lo, 0.0
    if f_hi == 0:
        return hi, 0.0
    if not (f_lo > 0 > f_hi):
        raise NoBracket(None)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol:
            return mid, fm
        if fm > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    raise NoBracket(None)


def solve_implicit_curve(stbsf, theta_grid: Sequence[float], tol: float = 1e-9, d_max: float = D_STAR,
                         fd_step: float = 1e-6) -> ImplicitCurve:
    """Bisect ``F(theta, .)`` on ``[-d_max, d_max]`` for each theta.

    Thetas without a bracketed root are dropped and the domain shrinks to the
    contiguous run around theta = 0.
    """
    thetas = np.sort(np.asarray(theta_grid, dtype=float))
    roots = np.full(thetas.shape, np.nan)
    resid = np.full(thetas.shape, np.nan)
    ok = np.zeros(thetas.shape, dtype=bool)
    for i, th in enumerate(thetas):
        th = float(th)
        try:
            roots[i], resid[i] = _bisect_root(lambda d: stbsf(th, d), -d_max, d_max, tol)
            ok[i] = True
        except ScorePathError:
            pass
    if not ok.any():
        raise NoBracket(float(thetas[np.argmin(np.abs(thetas))]))
    center = int(np.argmin(np.where(ok, np.abs(thetas), np.inf)))
    lo = center
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = center
    while hi < len(thetas) - 1 and ok[hi + 1]:
        hi += 1
    keep = np.zeros_like(ok)
    keep[lo:hi + 1] = True
    slopes = np.empty(hi + 1 - lo)
    for k, i in enumerate(range(lo, hi + 1)):
        ft, fd = _partials(stbsf, float(thetas[i]), float(roots[i]), fd_step)
        slopes[k] = -ft / fd if fd != 0 else (-np.inf if ft > 0 else np.inf)
    return ImplicitCurve(thetas[keep], roots[keep], slopes, resid[keep], tol, list(thetas[~keep]))


@dataclass(frozen=True)
class SlopeBounds:
    M: float
    eps: float
    margin: float
    chord_violations: tuple = ()

    @property
    def L_outer(self) -> float:
        return self.M + self.margin

    @property
    def L_inner(self) -> float:
        return self.eps - self.margin

    @property
    def chord_ok(self) -> bool:
        return not self.chord_violations

    def to_dict(self):
        return {"M": self.M, "eps": self.eps, "margin": self.margin, "L_outer": self.L_outer,
                "L_inner": self.L_inner, "chord_ok": self.chord_ok,
                "chord_violations": [list(v) for v in self.chord_violations]}


def slope_bounds(curve: ImplicitCurve, margin: Optional[float] = None, rel_margin: float = 0.1,
                 chord_slack: float = 1e-8) -> SlopeBounds:
    """``L_outer = sup|h'| + margin`` and ``L_inner = inf|h'| - margin``; margin defaults to ``rel_margin*inf|h'|``."""
    if len(curve) == 0:
        raise DegenerateSlopes("empty curve")
    mags = np.abs(curve.slopes)
    if np.any(curve.slopes >= 0) or not np.all(np.isfinite(mags)):
        raise DegenerateSlopes("h' must be strictly negative and finite on the whole domain")
    M, eps = float(mags.max()), float(mags.min())
    if margin is None:
        margin = rel_margin * eps
    if not margin > 0:
        raise ValueError("margin must be positive")
    if eps <= margin:
        raise DegenerateSlopes(f"inf|h'| = {eps!r} does not exceed margin {margin!r}")
    L_in, L_out = eps - margin, M + margin
    viol = []
    for th, h in zip(curve.thetas, curve.d_values):
        a = abs(th)
        if not (L_in * a - chord_slack <= abs(h) <= L_out * a + chord_slack) or (th != 0 and th * h >= 0):
            viol.append((float(th), float(h)))
    return SlopeBounds(M, eps, float(margin), tuple(viol))


@dataclass(frozen=True)
class ConePair:
    """``K1`` (theta <= 0, d >= 0) and ``K2`` (theta >= 0, d <= 0), both between the two lines, capped at ``|d| <= d_star``."""

    L_inner: float
    L_outer: float
    d_star: float = D_STAR

    def __post_init__(self):
        if not 0 < self.L_inner < self.L_outer:
            raise ValueError("need 0 < L_inner < L_outer")

    def slack(self, theta, d):
        """Signed distance-like margin: >= 0 inside ``K1 u K2``."""
        theta = np.asarray(theta, dtype=float)
        d = np.asarray(d, dtype=float)
        k1 = np.minimum(d + self.L_inner * theta, -self.L_outer * theta - d)
        k2 = np.minimum(-d - self.L_inner * theta, self.L_outer * theta + d)
        return np.minimum(np.maximum(k1, k2), self.d_star - np.abs(d))

    def contains(self, theta, d):
        return self.slack(theta, d) >= 0

    def which(self, theta, d) -> Optional[str]:
        if not self.contains(theta, d):
            return None
        return "K1" if theta < 0 or (theta == 0 and d > 0) else "K2"


def compute_delta(stbsf, L: float, side: Optional[int] = None, fd_step: float = 1e-6) -> float:
    """Limit of the inner-line boundary ratio at the origin: ``L * (L*F_d(0) - F_theta(0))``.

    With exact partials ``side`` is ignored; otherwise the slope of ``F(theta, -L*theta)`` is taken
    one-sidedly into the cone on ``side`` (-1 for K1, +1 for K2) or centrally when ``side`` is None.
    """
    if getattr(stbsf, "has_exact_partials", False):
        ft, fd = stbsf.partials(0.0, 0.0)
        slope = ft - L * fd
    else:
        g = lambda th: stbsf(th, -L * th)
        h = fd_step
        if side is None:
            slope = (g(h) - g(-h)) / (2 * h)
        else:
            s = 1.0 if side > 0 else -1.0
            slope = s * (-3 * g(0.0) + 4 * g(s * h) - g(2 * s * h)) / (2 * h)
    delta = L * (-slope)
    if not delta > 0:
        raise NonPositiveDelta(f"Delta = {delta!r} <= 0 for L = {L!r}; the line is on the wrong side of h'(0)")
    return float(delta)


def ratio_profile(stbsf, alpha: float, L: float, theta_samples) -> tuple[np.ndarray, np.ndarray]:
    """``L*F_L*exp(alpha*F_L^2)/(-sin theta)`` along ``d = -L*theta``."""
    th = np.asarray(theta_samples, dtype=float)
    if np.any(th == 0):
        raise ValueError("theta = 0 is the removable singularity; use compute_delta")
    f = np.array([stbsf(float(t), float(-L * t)) for t in th])
    return th, L * f * np.exp(alpha * f * f) / (-np.sin(th))


def numeric_ratio_bound(stbsf, params_alpha: float, L: float, theta_samples) -> float:
    th, ratio = ratio_profile(stbsf, params_alpha, L, theta_samples)
    bad = np.flatnonzero(~(ratio > 0))
    if bad.size:
        raise NegativeRatioSample(float(th[bad[0]]), float(ratio[bad[0]]))
    return float(ratio.min())


def boundary_thetas(L: float, d_cap: float, n: int, theta_min: float) -> np.ndarray:
    """Log-spaced ``|theta|`` from ``theta_min`` up to where the line meets the cap or the heading limit."""
    top = min(d_cap / L, THETA_CAP)
    return np.geomspace(theta_min, top, n)


@dataclass(frozen=True)
class BoundaryCheck:
    segment: str
    theta: float
    d: float
    value: float
    passed: bool


@dataclass(frozen=True)
class LyapunovCheck:
    theta: float
    d: float
    vdot: float
    passed: bool


def _field(stbsf, params: ControllerParams, theta, d):
    f = stbsf(theta, d)
    return params.gamma * f, params.beta * math.exp(-params.alpha * f * f) * math.sin(theta)


def certify_invariance(stbsf, params: ControllerParams, cones: ConePair, n_boundary: int = 64,
                       theta_min: float = 1e-3) -> list[BoundaryCheck]:
    """Nagumo test on the six boundary segments; a value >= 0 means the field does not point out."""
    checks = []
    Li, Lo, cap = cones.L_inner, cones.L_outer, cones.d_star
    for cone, sgn in (("K1", -1.0), ("K2", 1.0)):
        # sgn is the sign of theta inside the cone; d has the opposite sign
        for name, L in (("outer", Lo), ("inner", Li)):
            for a in boundary_thetas(L, cap, n_boundary, theta_min):
                th, d = sgn * a, -sgn * L * a
                dth, dd = _field(stbsf, params, th, d)
                # inward flux: K1 outer -(L*dth + dd), K1 inner +(L*dth + dd); K2 mirrors
                flux = L * dth + dd
                val = sgn * flux if name == "outer" else -sgn * flux
                checks.append(BoundaryCheck(f"{cone}_{name}", th, d, float(val), bool(val >= 0)))
        a_lo = cap / Lo
        a_hi = min(cap / Li, THETA_CAP)
        if a_lo < a_hi:
            for a in np.linspace(a_lo, a_hi, n_boundary):
                th, d = sgn * a, -sgn * cap
                _, dd = _field(stbsf, params, th, d)
                val = -dd if sgn < 0 else dd
                checks.append(BoundaryCheck(f"{cone}_cap", th, d, float(val), bool(val >= 0)))
    return checks


def certify_lyapunov(stbsf, params: ControllerParams, cones: ConePair, n_interior: int = 500, r0: float = 1e-3,
                     seed: int = 0) -> list[LyapunovCheck]:
    """Sample cone-interior states outside the ``r0`` ball and test ``dV/dt < 0`` for ``V = d^2/2``."""
    rng = np.random.default_rng(seed)
    Li, Lo, cap = cones.L_inner, cones.L_outer, cones.d_star
    a_hi = min(cap / Li, THETA_CAP)
    checks = []
    while len(checks) < n_interior:
        a = rng.uniform(0.0, a_hi)
        u = rng.uniform(0.0, 1.0)
        if a == 0.0 or u == 0.0:
            continue
        mag = (Li + u * (Lo - Li)) * a
        if mag >= cap or math.hypot(a, mag) <= r0:
            continue
        sgn = -1.0 if len(checks) % 2 == 0 else 1.0
        th, d = sgn * a, -sgn * mag
        f = stbsf(th, d)
        vdot = d * params.beta * math.exp(-params.alpha * f * f) * math.sin(th)
        checks.append(LyapunovCheck(th, d, float(vdot), bool(vdot < 0)))
    return checks


@dataclass
class EntryResult:
    ic: tuple
    entry_time: Optional[float]
    via: Optional[str]
    min_slack_after: Optional[float]
    event: str

    @property
    def finite(self) -> bool:
        return self.entry_time is not None


def finite_time_entry(stbsf, params: ControllerParams, cones: ConePair, ic_grid, t_max: float = 60.0,
                      r0: float = 1e-3, sim_cfg: Optional[SimConfig] = None) -> list[EntryResult]:
    """Simulate each initial state and record when it first lies in ``K1 u K2`` (or the ``r0`` ball)."""
    # continuous feedback, and no early stop: the convergence box is wider than the cones near the origin
    cfg = sim_cfg or SimConfig(control_period=None, t_max=t_max, d_star=cones.d_star, stop_on_converge=False)
    out = []
    for ic in ic_grid:
        tr = simulate(ic, stbsf, params, cfg)
        slack = cones.slack(tr.theta, tr.d)
        radius = np.hypot(tr.theta, tr.d)
        in_cone = slack >= 0
        in_ball = radius <= r0
        hit = np.flatnonzero(in_cone | in_ball)
        if hit.size == 0:
            out.append(EntryResult(tuple(ic), None, None, None, tr.event))
            continue
        k = int(hit[0])
        via = "cone" if in_cone[k] else "origin"
        after = slack[k:][radius[k:] > r0] if via == "origin" else slack[k:]
        min_after = float(after.min()) if via == "cone" and after.size else None
        out.append(EntryResult(tuple(ic), float(tr.t[k]), via, min_after, tr.event))
    return out


@dataclass
class AnalysisConfig:
    theta_max: float = 1.2
    n_curve: int = 241
    tol: float = 1e-9
    d_cap: float = D_STAR
    margin: Optional[float] = None
    rel_margin: float = 0.1
    n_boundary: int = 64
    theta_min: float = 1e-3
    n_interior: int = 500
    r0: float = 1e-3
    seed: int = 0

    @property
    def theta_grid(self):
        return np.linspace(-self.theta_max, self.theta_max, self.n_curve)

    @classmethod
    def from_dict(cls, cfg: dict) -> "AnalysisConfig":
        return cls(**cfg)


def build_cones(stbsf, cfg: AnalysisConfig = AnalysisConfig()):
    curve = solve_implicit_curve(stbsf, cfg.theta_grid, cfg.tol, cfg.d_cap)
    bounds = slope_bounds(curve, cfg.margin, cfg.rel_margin)
    return curve, bounds, ConePair(bounds.L_inner, bounds.L_outer, cfg.d_cap)


def admissible_ratio(stbsf, alpha: float, cones: ConePair, cfg: AnalysisConfig = AnalysisConfig()) -> dict:
    """Analytic limit and sampled infimum of the inner-line ratio over both cones."""
    L = cones.L_inner
    delta = min(compute_delta(stbsf, L, -1), compute_delta(stbsf, L, +1))
    a = boundary_thetas(L, cones.d_star, cfg.n_boundary, cfg.theta_min)
    numeric = numeric_ratio_bound(stbsf, alpha, L, np.concatenate([-a[::-1], a]))
    return {"delta_analytic": delta, "delta_numeric": numeric, "admissible_ratio": min(delta, numeric)}


@dataclass
class StabilityCertificate:
    delta_analytic: Optional[float]
    delta_numeric: Optional[float]
    admissible_ratio: Optional[float]
    ratio: float
    boundary_checks: list
    lyapunov_checks: list
    curve: Optional[ImplicitCurve] = None
    bounds: Optional[SlopeBounds] = None
    cones: Optional[ConePair] = None
    errors: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def boundary_ok(self) -> bool:
        return bool(self.boundary_checks) and all(c.passed for c in self.boundary_checks)

    @property
    def lyapunov_ok(self) -> bool:
        return bool(self.lyapunov_checks) and all(c.passed for c in self.lyapunov_checks)

    @property
    def verdict(self) -> bool:
        return (self.admissible_ratio is not None and self.boundary_ok and self.lyapunov_ok
                and self.ratio < self.admissible_ratio)

    def to_dict(self) -> dict:
        return {
            "verdict": "pass" if self.verdict else "fail",
            "ratio": self.ratio,
            "delta_analytic": self.delta_analytic,
            "delta_numeric": self.delta_numeric,
            "admissible_ratio": self.admissible_ratio,
            "slope_bounds": self.bounds.to_dict() if self.bounds else None,
            "cones": asdict(self.cones) if self.cones else None,
            "curve": self.curve.to_dict() if self.curve else None,
            "boundary_checks": [asdict(c) for c in self.boundary_checks],
            "boundary_failures": sum(not c.passed for c in self.boundary_checks),
            "lyapunov_checks": [asdict(c) for c in self.lyapunov_checks],
            "lyapunov_failures": sum(not c.passed for c in self.lyapunov_checks),
            "errors": list(self.errors),
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def certify(stbsf, params: ControllerParams, cfg: AnalysisConfig = AnalysisConfig()) -> StabilityCertificate:
    """Full certificate; failures in any stage are recorded rather than raised."""
    echo = {"analysis": asdict(cfg), "params": asdict(params)}
    cert = StabilityCertificate(None, None, None, params.ratio, [], [], config=echo)
    try:
        cert.curve, cert.bounds, cert.cones = build_cones(stbsf, cfg)
    except ScorePathError as exc:
        cert.errors.append(f"{type(exc).__name__}: {exc}")
        return cert
    if not cert.bounds.chord_ok:
        cert.errors.append(f"chord containment violated at {len(cert.bounds.chord_violations)} curve samples")
    try:
        adm = admissible_ratio(stbsf, params.alpha, cert.cones, cfg)
        cert.delta_analytic, cert.delta_numeric = adm["delta_analytic"], adm["delta_numeric"]
        cert.admissible_ratio = adm["admissible_ratio"]
    except ScorePathError as exc:
        cert.errors.append(f"{type(exc).__name__}: {exc}")
    cert.boundary_checks = certify_invariance(stbsf, params, cert.cones, cfg.n_boundary, cfg.theta_min)
    cert.lyapunov_checks = certify_lyapunov(stbsf, params, cert.cones, cfg.n_interior, cfg.r0, cfg.seed)
    return cert


def recommend_params(stbsf, gamma: float, alpha: float, safety: float = 0.5,
                     cfg: AnalysisConfig = AnalysisConfig()) -> ControllerParams:
    """``beta = safety * gamma * admissible_ratio`` with ``safety`` in (0, 1)."""
    if not 0 < safety < 1:
        raise ValueError("safety must lie strictly between 0 and 1")
    _, _, cones = build_cones(stbsf, cfg)
    adm = admissible_ratio(stbsf, alpha, cones, cfg)
    return ControllerParams(alpha, safety * gamma * adm["admissible_ratio"], gamma)
