"""Sample-based checks of the monotonicity conditions on a state score."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import EvaluationFailure, InconclusiveProtocol, OriginOutsideGrid
from .kinematics import D_STAR


@dataclass(frozen=True)
class VerifyGrid:
    theta_max: float = 1.2
    d_max: float = 0.9 * D_STAR
    n_theta: int = 41
    n_d: int = 41

    @property
    def thetas(self):
        return np.linspace(-self.theta_max, self.theta_max, self.n_theta)

    @property
    def ds(self):
        return np.linspace(-self.d_max, self.d_max, self.n_d)

    @classmethod
    def from_dict(cls, cfg: dict) -> "VerifyGrid":
        return cls(**cfg)


@dataclass
class PartialField:
    thetas: np.ndarray
    ds: np.ndarray
    f: np.ndarray  # (n_theta, n_d)
    df_dtheta: np.ndarray  # NaN off the interior
    df_dd: np.ndarray
    origin_score: Optional[float] = None

    @property
    def h_theta(self) -> float:
        return float(self.thetas[1] - self.thetas[0])

    @property
    def h_d(self) -> float:
        return float(self.ds[1] - self.ds[0])

    @property
    def interior(self) -> np.ndarray:
        m = np.zeros(self.f.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m


def _eval_grid(stbsf, T, D):
    try:
        out = np.asarray(stbsf.batch(T, D), dtype=float) if hasattr(stbsf, "batch") else None
        if out is not None and np.all(np.isfinite(out)):
            return out
    except Exception:  # retried pointwise so the failing state is reported
        pass
    out = np.empty(T.shape)
    for idx in np.ndindex(T.shape):
        th, dd = float(T[idx]), float(D[idx])
        try:
            out[idx] = float(stbsf(th, dd))
        except Exception as exc:
            raise EvaluationFailure(th, dd, exc) from exc
        if not math.isfinite(out[idx]):
            raise EvaluationFailure(th, dd, "non-finite score")
    return out


def estimate_partials(stbsf, grid: VerifyGrid = VerifyGrid()) -> PartialField:
    """Central differences at interior nodes, spacing equal to the grid spacing."""
    thetas, ds = grid.thetas, grid.ds
    if len(thetas) < 3 or len(ds) < 3:
        raise ValueError("grid needs at least 3 nodes per axis")
    T, D = np.meshgrid(thetas, ds, indexing="ij")
    f = _eval_grid(stbsf, T, D)
    ht, hd = thetas[1] - thetas[0], ds[1] - ds[0]
    ft = np.full(f.shape, np.nan)
    fd = np.full(f.shape, np.nan)
    ft[1:-1, 1:-1] = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2 * ht)
    fd[1:-1, 1:-1] = (f[1:-1, 2:] - f[1:-1, :-2]) / (2 * hd)
    origin = None
    if thetas[0] <= 0 <= thetas[-1] and ds[0] <= 0 <= ds[-1]:
        try:
            origin = float(stbsf(0.0, 0.0))
        except Exception as exc:
            raise EvaluationFailure(0.0, 0.0, exc) from exc
    return PartialField(thetas, ds, f, ft, fd, origin)


@dataclass
class ConditionReport:
    origin_score: float
    valid_mask: np.ndarray
    region: np.ndarray
    origin_node: tuple
    cond_zero: bool
    cond_theta: bool
    cond_d: bool
    strictness: float
    origin_tol: float
    contour: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cond_zero and self.cond_theta and self.cond_d

    @property
    def region_size(self) -> int:
        return int(self.region.sum())

    def to_dict(self, fld: PartialField = None) -> dict:
        out = {
            "flags": {"F_origin_zero": self.cond_zero, "dF_dtheta_negative": self.cond_theta,
                      "dF_dd_negative": self.cond_d},
            "origin_score": self.origin_score,
            "origin_tol": self.origin_tol,
            "strictness": self.strictness,
            "origin_node": list(self.origin_node),
            "region_size": self.region_size,
            "region_nodes": [list(map(int, ij)) for ij in np.argwhere(self.region)],
            "contour": [[list(map(float, p)) for p in line] for line in self.contour],
        }
        if fld is not None:
            out["region_states"] = [[float(fld.thetas[i]), float(fld.ds[j])] for i, j in np.argwhere(self.region)]
        return out


def _component(mask: np.ndarray, seed: tuple) -> np.ndarray:
    if not mask[seed]:
        return np.zeros_like(mask)
    labels, _ = ndimage.label(mask)  # default structure is 4-connected
    return labels == labels[seed]


def nearest_interior_origin_node(fld: PartialField) -> tuple:
    i = int(np.argmin(np.abs(fld.thetas[1:-1]))) + 1
    j = int(np.argmin(np.abs(fld.ds[1:-1]))) + 1
    return i, j


def check_conditions(fld: PartialField, strictness: float = 0.0, origin_tol: Optional[float] = None) -> ConditionReport:
    """Flag the three conditions and extract the 4-connected valid region around the origin.

    ``origin_tol`` defaults to 10% of the median ``|F|`` over the grid.
    """
    if fld.origin_score is None:
        raise OriginOutsideGrid("the origin is not inside the verification grid")
    if strictness < 0:
        raise ValueError("strictness must be >= 0")
    if origin_tol is None:
        origin_tol = 0.1 * float(np.median(np.abs(fld.f)))
    interior = fld.interior
    with np.errstate(invalid="ignore"):
        theta_ok = interior & (fld.df_dtheta < -strictness)
        d_ok = interior & (fld.df_dd < -strictness)
    valid = theta_ok & d_ok
    seed = nearest_interior_origin_node(fld)
    region = _component(valid, seed)
    return ConditionReport(
        origin_score=fld.origin_score,
        valid_mask=valid,
        region=region,
        origin_node=seed,
        cond_zero=abs(fld.origin_score) <= origin_tol,
        cond_theta=bool(_component(theta_ok, seed).any()),
        cond_d=bool(_component(d_ok, seed).any()),
        strictness=strictness,
        origin_tol=origin_tol,
        contour=region_contour(region, fld.thetas, fld.ds),
    )


def region_contour(region: np.ndarray, thetas: np.ndarray, ds: np.ndarray) -> list:
    """Closed polylines (theta, d) tracing the outer edges of the region's grid cells."""
    if not region.any():
        return []
    ht, hd = thetas[1] - thetas[0], ds[1] - ds[0]
    n_i, n_j = region.shape
    edges = {}

    def add(a, b):
        edges.setdefault(a, []).append(b)

    # corners indexed on a doubled lattice so cell corners are integer pairs
    for i, j in np.argwhere(region):
        i, j = int(i), int(j)
        c00, c10, c11, c01 = (2 * i - 1, 2 * j - 1), (2 * i + 1, 2 * j - 1), (2 * i + 1, 2 * j + 1), (2 * i - 1, 2 * j + 1)
        if j == 0 or not region[i, j - 1]:
            add(c00, c10)
        if i == n_i - 1 or not region[i + 1, j]:
            add(c10, c11)
        if j == n_j - 1 or not region[i, j + 1]:
            add(c11, c01)
        if i == 0 or not region[i - 1, j]:
            add(c01, c00)
    lines = []
    while edges:
        start = min(edges)
        loop = [start]
        cur = start
        while True:
            nxt = edges[cur].pop()
            if not edges[cur]:
                del edges[cur]
            loop.append(nxt)
            cur = nxt
            if cur == start or cur not in edges:
                break
        lines.append([(thetas[0] + 0.5 * a * ht, ds[0] + 0.5 * b * hd) for a, b in loop])
    return lines


@dataclass
class OnlineVerdict:
    protocol: str
    monotone: bool
    coords: np.ndarray
    scores: np.ndarray
    first_violation: Optional[tuple] = None


SPIN_IN_PLACE = "SpinInPlace"
LATERAL_SWEEP = "LateralSweep"


def online_check(stbsf, protocol: str, at: float, n: int = 11, span: float = 0.5) -> OnlineVerdict:
    """Sweep one coordinate, hold the other at ``at``, and require strictly decreasing scores.

    SpinInPlace sweeps theta over ``[-span, span]`` at fixed d; LateralSweep sweeps d at fixed theta.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    coords = np.linspace(-span, span, n)
    if protocol == SPIN_IN_PLACE:
        scores = np.array([stbsf(float(c), at) for c in coords])
    elif protocol == LATERAL_SWEEP:
        if math.isclose(abs(at), math.pi / 2, rel_tol=0, abs_tol=1e-12):
            raise InconclusiveProtocol("lateral sweep with |theta| = pi/2 cannot reveal dF/dd")
        scores = np.array([stbsf(at, float(c)) for c in coords])
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    bad = np.flatnonzero(np.diff(scores) >= 0)
    first = (int(bad[0]), int(bad[0]) + 1) if bad.size else None
    return OnlineVerdict(protocol, first is None, coords, scores, first)


def report_json(report: ConditionReport, fld: PartialField) -> str:
    return json.dumps(report.to_dict(fld), indent=2) + "\n"
