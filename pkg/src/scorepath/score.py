"""Score functions over measurements and over states."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch


class StateScore:
    """Scalar score over local path coordinates, ``F(theta, d[, s])``.

    Subclasses with closed-form derivatives override :meth:`partials`.
    """

    def __call__(self, theta: float, d: float, s: float = 0.0) -> float:
        raise NotImplementedError

    def batch(self, theta, d, s=None) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        d = np.asarray(d, dtype=float)
        theta, d = np.broadcast_arrays(theta, d)
        s = np.zeros_like(theta) if s is None else np.broadcast_to(np.asarray(s, dtype=float), theta.shape)
        out = np.empty(theta.shape)
        for idx in np.ndindex(theta.shape):
            out[idx] = self(float(theta[idx]), float(d[idx]), float(s[idx]))
        return out

    @property
    def has_exact_partials(self) -> bool:
        return False

    def partials(self, theta: float, d: float) -> tuple[float, float]:
        raise NotImplementedError


class FunctionScore(StateScore):
    """Wraps a plain ``f(theta, d)`` callable."""

    def __init__(self, fn: Callable[[float, float], float], partials: Optional[Callable] = None):
        self.fn = fn
        self._partials = partials

    def __call__(self, theta, d, s=0.0):
        return float(self.fn(theta, d))

    @property
    def has_exact_partials(self):
        return self._partials is not None

    def partials(self, theta, d):
        if self._partials is None:
            raise NotImplementedError
        return tuple(float(x) for x in self._partials(theta, d))


@dataclass(frozen=True)
class AffineStBSF(StateScore):
    """``F = -a*theta - b*d - cubic*theta**3`` with ``a, b > 0`` and ``cubic >= 0``."""

    a: float = 1.0
    b: float = 1.0
    cubic: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.cubic >= 0):
            raise ValueError("need a > 0, b > 0, cubic >= 0")

    def __call__(self, theta, d, s=0.0):
        return -self.a * theta - self.b * d - self.cubic * theta ** 3

    def batch(self, theta, d, s=None):
        theta = np.asarray(theta, dtype=float)
        d = np.asarray(d, dtype=float)
        return -self.a * theta - self.b * d - self.cubic * theta ** 3

    @property
    def has_exact_partials(self):
        return True

    def partials(self, theta, d):
        return -self.a - 3.0 * self.cubic * theta * theta, -self.b

    def h(self, theta):
        """Zero level set written as ``d = h(theta)``."""
        return -(self.a * theta + self.cubic * theta ** 3) / self.b

    def h_prime(self, theta):
        return -(self.a + 3.0 * self.cubic * theta * theta) / self.b

    def to_dict(self):
        return {"kind": "affine", "a": self.a, "b": self.b, "cubic": self.cubic}


def eval_affine(fam: AffineStBSF, state) -> dict:
    theta, d = state[0], state[1]
    f_theta, f_d = fam.partials(theta, d)
    return {"F": fam(theta, d), "dF_dtheta": f_theta, "dF_dd": f_d,
            "h": fam.h(theta), "h_prime": fam.h_prime(theta)}


@dataclass
class LinearScoreModel:
    """Measurement score ``w.y + c``; weights act on raw ranges."""

    weights: np.ndarray
    bias: float
    feature_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        self.bias = float(self.bias)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def __call__(self, y) -> float:
        return eval_linear(self, y)

    def batch(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {Y.shape[1]}")
        return Y @ self.weights + self.bias

    def to_json(self) -> str:
        payload = {"version": 1, "weights": [float(w) for w in self.weights], "bias": self.bias,
                   "feature_meta": _jsonable(self.feature_meta)}
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "LinearScoreModel":
        obj = json.loads(text)
        if obj.get("version") != 1:
            raise ValueError(f"unsupported model version {obj.get('version')!r}")
        return cls(np.array(obj["weights"], dtype=float), obj["bias"], obj.get("feature_meta", {}))

    @classmethod
    def load(cls, path) -> "LinearScoreModel":
        return cls.from_json(Path(path).read_text())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def eval_linear(model: LinearScoreModel, y) -> float:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {y.shape[0]}")
    return float(np.dot(model.weights, y) + model.bias)


class ComposedScore(StateScore):
    """``F(x) = sebsf(sensor(x))``."""

    def __init__(self, sebsf, sensor):
        n_in = getattr(sebsf, "n_features", None)
        n_out = getattr(sensor, "n_outputs", None)
        if n_in is not None and n_out is not None and n_in != n_out:
            raise DimensionMismatch(f"sensor emits {n_out} values, score expects {n_in}")
        self.sebsf = sebsf
        self.sensor = sensor

    def __call__(self, theta, d, s=0.0):
        return float(self.sebsf(self.sensor(theta, d, s)))

    def batch(self, theta, d, s=None):
        if hasattr(self.sensor, "batch") and hasattr(self.sebsf, "batch"):
            theta = np.asarray(theta, dtype=float)
            d = np.asarray(d, dtype=float)
            theta, d = np.broadcast_arrays(theta, d)
            Y = self.sensor.batch(theta.ravel(), d.ravel(), None if s is None else np.ravel(s))
            return self.sebsf.batch(Y).reshape(theta.shape)
        return super().batch(theta, d, s)


def compose(sebsf, sensor) -> ComposedScore:
    return ComposedScore(sebsf, sensor)


def score_from_spec(spec: dict, sensor_factory=None) -> StateScore:
    """Build a state score from a config entry.

    ``{"kind": "affine", "a":.., "b":.., "cubic":..}`` or ``{"kind": "model", "path": ...}``;
    model scores need ``sensor_factory(feature_meta)`` returning a sensor map.
    """
    kind = spec.get("kind", "affine")
    if kind == "affine":
        return AffineStBSF(spec.get("a", 1.0), spec.get("b", 1.0), spec.get("cubic", 0.0))
    if kind == "model":
        model = LinearScoreModel.load(spec["path"])
        if sensor_factory is None:
            raise ValueError("model score needs a sensor map")
        return compose(model, sensor_factory(model.feature_meta))
    raise ValueError(f"unknown score kind {kind!r}")
