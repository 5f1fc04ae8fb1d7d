"""Linear classifiers, margin losses and the loss/error functionals built on them."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteDistribution

__all__ = [
    "Loss",
    "LinearModel",
    "score",
    "predict",
    "margin_loss",
    "loss_fn",
    "population_loss",
    "zero_one_error",
    "unlabeled_loss",
    "soft_label_loss",
    "sigmoid",
]

PROB_CLAMP = 1e-12


class Loss(str, enum.Enum):
    RAMP = "ramp"
    HINGE = "hinge"
    LOGISTIC = "logistic"


def loss_fn(kind: Loss | str, m):
    """Apply the margin loss ``kind`` elementwise to margins ``m = y * score``."""
    kind = Loss(kind)
    m = np.asarray(m, dtype=float)
    if kind is Loss.HINGE:
        return np.maximum(1.0 - m, 0.0)
    if kind is Loss.RAMP:
        return np.minimum(np.maximum(1.0 - m, 0.0), 1.0)
    return np.logaddexp(0.0, -m)


def margin_loss(kind: Loss | str, prediction: float, y: int) -> float:
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y!r}")
    return float(loss_fn(kind, y * prediction))


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-np.logaddexp(0.0, -z))


@dataclass(frozen=True)
class LinearModel:
    """``x -> w.x + b`` with an optional norm budget ``R`` on ``w`` (None = unbounded)."""

    w: np.ndarray
    b: float = 0.0
    R: float | None = None

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float)).copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        if self.R is not None:
            if not self.R > 0:
                raise ValueError("norm budget R must be positive")
            if np.linalg.norm(w) > self.R + 1e-9:
                raise ValueError(f"||w|| = {np.linalg.norm(w):.6g} exceeds R = {self.R}")

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    @classmethod
    def zeros(cls, d: int, R: float | None = None) -> "LinearModel":
        return cls(np.zeros(d), 0.0, R)

    def scores(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.dim == 1 else x[None, :]
        if x.shape[1] != self.dim:
            raise ValueError(f"input dimension {x.shape[1]} != model dimension {self.dim}")
        return x @ self.w + self.b

    def predict(self, x) -> np.ndarray:
        # sign(0) = +1
        return np.where(self.scores(x) >= 0, 1, -1)

    def scaled(self, alpha: float) -> "LinearModel":
        return LinearModel(alpha * self.w, alpha * self.b, None)

    def with_budget(self, R: float | None) -> "LinearModel":
        return LinearModel(self.w, self.b, R)

    def params(self) -> np.ndarray:
        return np.append(self.w, self.b)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "R": self.R}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.asarray(d["w"], float), d["b"], d.get("R"))

    @classmethod
    def from_json(cls, s: str) -> "LinearModel":
        return cls.from_dict(json.loads(s))


def score(model: LinearModel, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dim,):
        raise ValueError(f"input dimension {x.shape} != model dimension {model.dim}")
    return float(model.w @ x + model.b)


def predict(model: LinearModel, x) -> int:
    return 1 if score(model, x) >= 0 else -1


def population_loss(kind: Loss | str, model: LinearModel, dist: DiscreteDistribution) -> float:
    """Mass-weighted expected margin loss of ``model`` under ``dist``."""
    m = dist.labels * model.scores(dist.points)
    return float(np.dot(dist.masses, loss_fn(kind, m)))


def zero_one_error(model: LinearModel, dist: DiscreteDistribution) -> float:
    return float(np.dot(dist.masses, model.predict(dist.points) != dist.labels))


def unlabeled_loss(kind: Loss | str, model: LinearModel, points, masses=None) -> float:
    """E[phi(|w.x + b|)]: the loss of a model against its own sign."""
    if isinstance(points, DiscreteDistribution):
        points, masses = points.points, points.masses
    s = np.abs(model.scores(points))
    vals = loss_fn(kind, s)
    if masses is None:
        return float(vals.mean())
    return float(np.dot(masses, vals))


def soft_label_loss(teacher: LinearModel, student: LinearModel, dist) -> float:
    """Expected cross-entropy of student probabilities against teacher probabilities.

    ``dist`` is a :class:`DiscreteDistribution` (labels ignored) or an array of
    points weighted uniformly.
    """
    if isinstance(dist, DiscreteDistribution):
        x, masses = dist.points, dist.masses
    else:
        x = np.asarray(dist, float)
        masses = np.full(x.shape[0], 1.0 / x.shape[0])
    p = sigmoid(teacher.scores(x))
    q = np.clip(sigmoid(student.scores(x)), PROB_CLAMP, 1.0 - PROB_CLAMP)
    ce = -(p * np.log(q) + (1.0 - p) * np.log1p(-q))
    return float(np.dot(masses, ce))
