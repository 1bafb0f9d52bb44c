"""Labeled corridor scans and deterministic linear SVM training."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, EmptyDataset, SingleClassData
from .kinematics import State
from .score import LinearScoreModel
from .sensor import Corridor, SensorConfig, render_batch, render_depth


@dataclass(frozen=True)
class GridSpec:
    theta_max: float = 1.2
    d_max: float = 0.95
    n_theta: int = 41
    n_d: int = 41
    theta_min: float = None
    d_min: float = None

    @property
    def thetas(self) -> np.ndarray:
        lo = -self.theta_max if self.theta_min is None else self.theta_min
        return np.linspace(lo, self.theta_max, self.n_theta)

    @property
    def ds(self) -> np.ndarray:
        lo = -self.d_max if self.d_min is None else self.d_min
        return np.linspace(lo, self.d_max, self.n_d)

    def nodes(self):
        """Row-major over theta, then d."""
        T, D = np.meshgrid(self.thetas, self.ds, indexing="ij")
        return T.ravel(), D.ravel()

    @classmethod
    def from_dict(cls, cfg: dict) -> "GridSpec":
        return cls(**cfg)


class LabeledSample(NamedTuple):
    state: State
    scan: np.ndarray
    label: int


def label_rule(theta, d, theta_scale=1.0, d_scale=1.0):
    """``sign(-theta - d)`` with optional per-axis scales; returns the label and its argument."""
    arg = -np.asarray(theta) / theta_scale - np.asarray(d) / d_scale
    return np.where(arg > 0, 1, -1), arg


@dataclass
class Dataset:
    theta: np.ndarray
    d: np.ndarray
    label: np.ndarray
    scans: np.ndarray
    sensor_meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.label)

    def __getitem__(self, i) -> LabeledSample:
        return LabeledSample(State(float(self.theta[i]), float(self.d[i])), self.scans[i], int(self.label[i]))

    def to_csv(self, path) -> None:
        n = self.scans.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "d", "label"] + [f"r_{i}" for i in range(n)])
            for t, d, lab, row in zip(self.theta, self.d, self.label, self.scans):
                w.writerow([repr(float(t)), repr(float(d)), int(lab)] + [repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path, sensor_meta=None) -> "Dataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        if body.size == 0:
            raise EmptyDataset(f"{path} holds no samples")
        return cls(body[:, 0], body[:, 1], body[:, 2].astype(int), body[:, 3:], dict(sensor_meta or {}))


def generate_dataset(corridor: Corridor, cfg: SensorConfig, grid: GridSpec, exclusion_margin: float = 0.05,
                     theta_scale: float = 1.0, d_scale: float = 1.0, seed: int = 0) -> Dataset:
    thetas, ds = grid.nodes()
    if np.any(np.abs(thetas) >= np.pi / 2) or np.any(np.abs(ds) > 0.8 * corridor.w_half + 1e-12):
        raise ValueError("dataset grid must satisfy |theta| < pi/2 and |d| <= 0.8 * w_half")
    labels, arg = label_rule(thetas, ds, theta_scale, d_scale)
    keep = np.abs(arg) >= exclusion_margin
    if not np.any(keep):
        raise EmptyDataset("exclusion margin removed every grid point")
    thetas, ds, labels = thetas[keep], ds[keep], labels[keep]
    if cfg.noise_sigma > 0:
        scans = np.array([render_depth(corridor, cfg, (t, d, 0.0), seed) for t, d in zip(thetas, ds)])
    else:
        scans = render_batch(corridor, cfg, thetas, ds)
    meta = {"n_rays": cfg.n_rays, "fov_rad": cfg.fov, "max_range_m": cfg.max_range,
            "corridor_width_m": corridor.width}
    return Dataset(thetas, ds, labels.astype(int), scans, meta)


@dataclass(frozen=True)
class SvmHyperParams:
    reg_lambda: float = 1e-2
    epochs: int = 100
    seed: int = 0
    project: bool = True
    # iterates after this fraction of all steps are averaged; 1.0 keeps the last iterate
    average_tail: float = 0.5

    def __post_init__(self):
        if not self.reg_lambda > 0:
            raise ValueError("reg_lambda must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.average_tail <= 1.0:
            raise ValueError("average_tail must lie in [0, 1]")

    @classmethod
    def from_dict(cls, cfg: dict) -> "SvmHyperParams":
        return cls(**cfg)


def train_linear_svm(data: Dataset, hp: SvmHyperParams = SvmHyperParams()) -> LinearScoreModel:
    """Primal hinge-loss subgradient descent (Pegasos) with step ``1/(lambda*t)``.

    Features are standardized; the stored weights are folded back onto raw ranges.
    The bias rides along as a constant feature.
    """
    y = np.asarray(data.label, dtype=float)
    if len(np.unique(y)) < 2:
        raise SingleClassData("training data holds a single class")
    X = np.asarray(data.scans, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    Z = np.hstack([(X - mean) / std, np.ones((X.shape[0], 1))])
    rng = np.random.default_rng(hp.seed)
    order = np.stack([rng.permutation(len(y)) for _ in range(hp.epochs)]).astype(np.int64)
    avg_start = int(round(hp.average_tail * order.size))
    w_aug = _kernels.pegasos(np.ascontiguousarray(Z), y, order, float(hp.reg_lambda), bool(hp.project), avg_start)
    w_std, b_std = w_aug[:-1], w_aug[-1]
    weights = w_std / std
    bias = float(b_std - np.dot(weights, mean))
    meta = {k: data.sensor_meta[k] for k in ("n_rays", "fov_rad", "max_range_m", "corridor_width_m")
            if k in data.sensor_meta}
    meta.update({"feature_mean": mean.tolist(), "feature_std": std.tolist(),
                 "svm": asdict(hp), "n_train": int(len(y))})
    model = LinearScoreModel(weights, bias, meta)
    model.feature_meta["train_accuracy"] = evaluate_classifier(model, data)["accuracy"]
    return model


def evaluate_classifier(model: LinearScoreModel, data: Dataset, bins: int = 20) -> dict:
    X = np.asarray(data.scans, dtype=float)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, data has {X.shape[1]}")
    scores = model.batch(X)
    pred = np.where(scores >= 0, 1, -1)
    margins = scores * np.asarray(data.label, dtype=float)
    counts, edges = np.histogram(margins, bins=bins)
    return {"accuracy": float(np.mean(pred == data.label)),
            "margin_histogram": {"counts": counts.tolist(), "edges": edges.tolist()}}
