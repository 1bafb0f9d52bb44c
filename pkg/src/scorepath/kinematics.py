"""Unicycle kinematics in local path coordinates and the fixed-step simulator."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from .errors import ScorePathError, SingularityError

SINGULARITY_MARGIN = 1e-6
D_STAR = 1.22

CONVERGED = "Converged"
CRASHED = "Crashed"
TIMEOUT = "Timeout"
SINGULARITY = "Singularity"
EVENTS = (CONVERGED, CRASHED, TIMEOUT, SINGULARITY)


class State(NamedTuple):
    """Heading error ``theta`` [rad], lateral offset ``d`` [m], arc length ``s`` [m]."""

    theta: float
    d: float
    s: float = 0.0


class Derivative(NamedTuple):
    dtheta: float
    dd: float
    ds: float


@dataclass(frozen=True)
class ControllerParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    @property
    def ratio(self) -> float:
        return self.beta / self.gamma

    def controls(self, score: float) -> tuple[float, float]:
        """Smooth law: ``(v, omega) = (beta*exp(-alpha*F^2), gamma*F)``."""
        return self.beta * math.exp(-self.alpha * score * score), self.gamma * score


@dataclass(frozen=True)
class PathModel:
    """Path curvature as a constant or as a function of arc length."""

    curvature: Union[float, Callable[[float], float]] = 0.0

    def rho(self, s: float) -> float:
        c = self.curvature
        return float(c(s)) if callable(c) else float(c)

    @property
    def straight(self) -> bool:
        return not callable(self.curvature) and self.curvature == 0.0


STRAIGHT = PathModel()


def dynamics_rhs(state, v: float, omega: float, path: PathModel = STRAIGHT) -> Derivative:
    theta, d, s = state
    rho = path.rho(s)
    denom = 1.0 - rho * d
    if abs(denom) <= SINGULARITY_MARGIN:
        raise SingularityError(f"1 - rho*d = {denom!r} at s={s!r}, d={d!r}")
    c = math.cos(theta)
    return Derivative(omega - v * c * rho / denom, v * math.sin(theta), v * c / denom)


def closed_loop_rhs(state, stbsf, params: ControllerParams, path: PathModel = STRAIGHT) -> Derivative:
    score = stbsf(state[0], state[1], state[2])
    v, omega = params.controls(score)
    return dynamics_rhs(state, v, omega, path)


def step_rk4(state, rhs: Callable, dt: float):
    """One classical RK4 step of ``x' = rhs(x)``; returns the same container type for State."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(_like(state, x)), dtype=float)
    x2 = x + 0.5 * dt * k1
    k2 = np.asarray(rhs(_like(state, x2)), dtype=float)
    x3 = x + 0.5 * dt * k2
    k3 = np.asarray(rhs(_like(state, x3)), dtype=float)
    x4 = x + dt * k3
    k4 = np.asarray(rhs(_like(state, x4)), dtype=float)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _like(state, out)


def _like(template, x):
    if isinstance(template, State):
        return State(float(x[0]), float(x[1]), float(x[2]))
    return x


@dataclass
class SimConfig:
    dt: float = 0.01
    # None means the score is re-evaluated inside every RK stage (continuous feedback).
    control_period: Optional[float] = 0.01
    t_max: float = 60.0
    d_star: float = D_STAR
    conv_d: Optional[float] = None
    conv_theta: float = 0.05
    dwell: float = 1.0
    stop_on_converge: bool = True
    path: PathModel = field(default_factory=PathModel)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.control_period is not None:
            k = self.control_period / self.dt
            if abs(k - round(k)) > 1e-9 or round(k) < 1:
                raise ValueError("control_period must be a positive integer multiple of dt")
        if self.conv_d is None:
            self.conv_d = 0.05 * self.d_star

    @property
    def hold_steps(self) -> Optional[int]:
        if self.control_period is None:
            return None
        return int(round(self.control_period / self.dt))

    @classmethod
    def from_dict(cls, cfg: dict) -> "SimConfig":
        cfg = dict(cfg)
        rho = cfg.pop("curvature", 0.0)
        return cls(path=PathModel(float(rho)), **cfg)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in
               ("dt", "control_period", "t_max", "d_star", "conv_d", "conv_theta", "dwell", "stop_on_converge")}
        if not callable(self.path.curvature):
            out["curvature"] = self.path.curvature
        return out


@dataclass
class Trajectory:
    t: np.ndarray
    theta: np.ndarray
    d: np.ndarray
    s: np.ndarray
    F: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    event: str
    dt: float

    def __len__(self):
        return len(self.t)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def state(self, i: int) -> State:
        return State(float(self.theta[i]), float(self.d[i]), float(self.s[i]))

    COLUMNS = ("t", "theta", "d", "s", "F", "v", "omega")

    def to_csv(self, path) -> None:
        """Write ``path`` plus a sibling ``.json`` holding the termination event."""
        path = Path(path)
        cols = [getattr(self, c) for c in self.COLUMNS]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in zip(*cols):
                w.writerow([repr(float(x)) for x in row])
        meta = {"event": self.event, "t_end": self.t_end, "dt": self.dt}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if tuple(header) != cls.COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        data = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(-1, len(header))
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(*(data[:, i].copy() for i in range(len(header))), event=meta["event"], dt=meta["dt"])


def in_admissible(theta: float, d: float, d_star: float) -> bool:
    return abs(theta) < math.pi / 2 and abs(d) < d_star


def simulate(x0, stbsf, params: Optional[ControllerParams], cfg: SimConfig = None,
             controller: Optional[Callable[[float], tuple]] = None) -> Trajectory:
    """Integrate the closed loop from ``x0`` until an event fires.

    ``controller`` maps a score to ``(v, omega)``; defaults to ``params.controls``.
    Controls are held between updates every ``cfg.control_period`` seconds.
    """
    cfg = cfg or SimConfig()
    if controller is None:
        controller = params.controls
    x0 = State(*x0) if len(x0) == 3 else State(x0[0], x0[1], 0.0)
    if not in_admissible(x0.theta, x0.d, cfg.d_star):
        raise ValueError(f"initial state {x0} outside the admissible region")
    hold = cfg.hold_steps
    path = cfg.path
    dt = cfg.dt
    n_max = int(math.ceil(cfg.t_max / dt - 1e-9))
    dwell_steps = int(round(cfg.dwell / dt))

    rows = []
    x = x0
    v = omega = 0.0
    score = float("nan")
    dwell_start = None
    event = None
    k = 0

    def eval_score(st):
        return float(stbsf(st.theta, st.d, st.s))

    while True:
        t = k * dt
        crashed = not in_admissible(x.theta, x.d, cfg.d_star)
        if hold is None or k % hold == 0 or crashed:
            try:
                score = eval_score(x)
                v, omega = controller(score)
            except ScorePathError:
                if not crashed:
                    raise
                score = v = omega = float("nan")
        rows.append((t, x.theta, x.d, x.s, score, v, omega))
        if crashed:
            event = CRASHED
            break
        if abs(x.d) < cfg.conv_d and abs(x.theta) < cfg.conv_theta:
            if dwell_start is None:
                dwell_start = k
            if k == 0 and _is_fixed_point(x, v, omega, path):
                event = CONVERGED
                break
            if cfg.stop_on_converge and k - dwell_start >= dwell_steps:
                event = CONVERGED
                break
        else:
            dwell_start = None
        if k >= n_max:
            event = TIMEOUT
            break
        try:
            if hold is None:
                x = step_rk4(x, lambda st: dynamics_rhs(st, *controller(eval_score(st)), path), dt)
            else:
                x = step_rk4(x, lambda st: dynamics_rhs(st, v, omega, path), dt)
        except SingularityError:
            event = SINGULARITY
            break
        k += 1

    arr = np.array(rows, dtype=float)
    return Trajectory(*(arr[:, i].copy() for i in range(7)), event=event, dt=dt)


def _is_fixed_point(x: State, v: float, omega: float, path: PathModel) -> bool:
    try:
        der = dynamics_rhs(x, v, omega, path)
    except SingularityError:
        return False
    return der.dtheta == 0.0 and der.dd == 0.0
