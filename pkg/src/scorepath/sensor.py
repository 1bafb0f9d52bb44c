"""Planar raycast depth scanner inside an infinite straight corridor."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import PoseOutsideCorridor

MIN_RANGE = 1e-6


@dataclass(frozen=True)
class Perturbation:
    """Stretch of wall (by robot arc length) that returns no echo, e.g. a glass pane or an opening."""

    s_start: float
    s_end: float
    side: int = 1  # +1: wall at d = +w_half, -1: wall at d = -w_half

    def active(self, s):
        return (s >= self.s_start) & (s <= self.s_end)


@dataclass(frozen=True)
class Corridor:
    width: float = 2.44
    perturbations: tuple = ()

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("corridor width must be positive")

    @property
    def w_half(self) -> float:
        return 0.5 * self.width

    @classmethod
    def from_dict(cls, cfg: dict) -> "Corridor":
        perts = tuple(Perturbation(**p) for p in cfg.get("perturbations", ()))
        return cls(width=cfg.get("width", 2.44), perturbations=perts)


@dataclass(frozen=True)
class SensorConfig:
    n_rays: int = 64
    fov: float = 1.5
    max_range: float = 10.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.n_rays < 2:
            raise ValueError("n_rays must be >= 2")
        if not 0 < self.fov < np.pi:
            raise ValueError("fov must lie in (0, pi)")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def ray_angles(self) -> np.ndarray:
        return np.linspace(-0.5 * self.fov, 0.5 * self.fov, self.n_rays)

    @classmethod
    def from_dict(cls, cfg: dict) -> "SensorConfig":
        return cls(**{k: cfg[k] for k in ("n_rays", "fov", "max_range", "noise_sigma") if k in cfg})


def _state_rng(seed: int, theta: float, d: float, s: float) -> np.random.Generator:
    words = struct.unpack("<6I", struct.pack("<3d", theta, d, s))
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *words])


def render_batch(corridor: Corridor, cfg: SensorConfig, theta, d, s=None) -> np.ndarray:
    """Noise-free scans for many poses at once, shape ``(n_poses, n_rays)``."""
    theta = np.ascontiguousarray(np.ravel(theta), dtype=float)
    d = np.ascontiguousarray(np.ravel(d), dtype=float)
    w_half = corridor.w_half
    if np.any(np.abs(d) >= w_half):
        bad = float(d[np.argmax(np.abs(d))])
        raise PoseOutsideCorridor(f"|d|={abs(bad)!r} >= half width {w_half!r}")
    phis = cfg.ray_angles
    out = _kernels.raycast(theta, d, phis, w_half, float(cfg.max_range))
    if corridor.perturbations:
        s = np.zeros_like(theta) if s is None else np.ravel(np.asarray(s, dtype=float))
        lateral = np.sin(theta[:, None] + phis[None, :])
        for p in corridor.perturbations:
            hit = p.active(s)[:, None] & (np.sign(lateral) == p.side)
            out[hit] = cfg.max_range
    return out


def render_depth(corridor: Corridor, cfg: SensorConfig, state, seed: int = 0) -> np.ndarray:
    """Range vector for a single pose; ray ``i`` points at world angle ``theta + phi_i``."""
    theta, d = float(state[0]), float(state[1])
    s = float(state[2]) if len(state) > 2 else 0.0
    scan = render_batch(corridor, cfg, np.array([theta]), np.array([d]), np.array([s]))[0]
    if cfg.noise_sigma > 0:
        rng = _state_rng(seed, theta, d, s)
        scan = scan + rng.normal(0.0, cfg.noise_sigma, scan.shape)
        np.clip(scan, MIN_RANGE, cfg.max_range, out=scan)
    return scan


class SensorMap:
    """The map ``H: (theta, d[, s]) -> ranges`` used by :func:`scorepath.score.compose`."""

    def __init__(self, corridor: Corridor, cfg: SensorConfig, seed: int = 0):
        self.corridor = corridor
        self.cfg = cfg
        self.seed = seed

    @property
    def n_outputs(self) -> int:
        return self.cfg.n_rays

    @property
    def deterministic(self) -> bool:
        return self.cfg.noise_sigma == 0

    def __call__(self, theta, d, s=0.0):
        return render_depth(self.corridor, self.cfg, (theta, d, s), self.seed)

    def batch(self, theta, d, s=None):
        if not self.deterministic:
            s = np.zeros(np.size(theta)) if s is None else np.ravel(s)
            return np.array([self(t, dd, ss) for t, dd, ss in zip(np.ravel(theta), np.ravel(d), s)])
        return render_batch(self.corridor, self.cfg, theta, d, s)

    def feature_meta(self) -> dict:
        return {"n_rays": self.cfg.n_rays, "fov_rad": self.cfg.fov, "max_range_m": self.cfg.max_range}


def sensor_map(corridor: Corridor, cfg: SensorConfig, noisy: bool = False, seed: int = 0) -> SensorMap:
    """Deterministic sensor map unless ``noisy`` is set."""
    if not noisy and cfg.noise_sigma != 0:
        cfg = SensorConfig(cfg.n_rays, cfg.fov, cfg.max_range, 0.0)
    return SensorMap(corridor, cfg, seed)
