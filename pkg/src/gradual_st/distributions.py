"""Labeled point sets, finite discrete distributions and Gaussian-mixture domains.

Labels are always the integers -1 and +1. Points are stored as rows of a
float64 array of shape ``(n, d)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

__all__ = [
    "DataError",
    "LabeledPoints",
    "DiscreteDistribution",
    "GaussianMixtureDomain",
    "DomainSequence",
    "sample_domain",
    "empirical_distribution",
    "second_moment_bound",
    "read_csv",
    "read_weighted_csv",
    "write_csv",
]

MASS_TOL = 1e-12


class DataError(ValueError):
    """Malformed input data (bad labels, ragged dimensions, unparsable files)."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    if y.size and not np.all((y == 1) | (y == -1)):
        raise DataError("labels must be -1 or +1")
    return y.astype(np.int64)


@dataclass(frozen=True)
class LabeledPoints:
    """A list of labeled points, kept as parallel arrays."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = _check_labels(self.y)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DataError(f"shape mismatch: x {x.shape}, y {y.shape}")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, init=False)
class DiscreteDistribution:
    """Finitely supported probability measure on R^d x {-1, +1}.

    Atoms with bitwise-identical ``(x, y)`` are merged on construction, with
    their masses summed. Masses must be positive and sum to one.
    """

    points: np.ndarray
    labels: np.ndarray
    masses: np.ndarray

    def __init__(self, points, labels, masses=None):
        x = np.asarray(points, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] == 0:
            raise DataError("a distribution needs at least one atom")
        y = _check_labels(labels)
        if y.shape != (x.shape[0],):
            raise DataError(f"{x.shape[0]} points but {y.shape} labels")
        m = np.full(x.shape[0], 1.0 / x.shape[0]) if masses is None else np.asarray(masses, float)
        if m.shape != y.shape:
            raise DataError("one mass per atom required")
        if np.any(~(m > 0)):
            raise DataError("atom masses must be strictly positive")
        if abs(m.sum() - 1.0) > 1e-9:
            raise DataError(f"masses sum to {m.sum()!r}, not 1")

        # exact merge: key on the raw bytes of each row plus the label
        keys: dict[bytes, int] = {}
        order: list[int] = []
        merged = []
        for i in range(x.shape[0]):
            k = x[i].tobytes() + (b"+" if y[i] > 0 else b"-")
            j = keys.get(k)
            if j is None:
                keys[k] = len(order)
                order.append(i)
                merged.append(m[i])
            else:
                merged[j] += m[i]
        idx = np.array(order)
        merged = np.array(merged)
        merged = merged / merged.sum()
        object.__setattr__(self, "points", _frozen(x[idx]))
        object.__setattr__(self, "labels", _frozen(y[idx]))
        object.__setattr__(self, "masses", _frozen(merged))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def class_mass(self, label: int) -> float:
        return float(self.masses[self.labels == label].sum())

    def conditional(self, label: int) -> tuple[np.ndarray, np.ndarray]:
        """Points and renormalised masses of X | Y = label."""
        sel = self.labels == label
        if not sel.any():
            raise DataError(f"class {label:+d} is absent")
        m = self.masses[sel]
        return self.points[sel], m / m.sum()

    def marginal(self) -> tuple[np.ndarray, np.ndarray]:
        """Points and masses of the X-marginal (labels dropped, coincident points merged)."""
        keys: dict[bytes, int] = {}
        pts, ms = [], []
        for xi, mi in zip(self.points, self.masses):
            k = xi.tobytes()
            j = keys.get(k)
            if j is None:
                keys[k] = len(pts)
                pts.append(xi)
                ms.append(mi)
            else:
                ms[j] += mi
        return np.array(pts), np.array(ms)

    def relabel(self, labels) -> "DiscreteDistribution":
        return DiscreteDistribution(self.points, labels, self.masses)


@dataclass(frozen=True)
class GaussianMixtureDomain:
    """Two-class Gaussian domain: X | Y=+1 ~ N(mu_pos, sigma_pos), X | Y=-1 ~ N(mu_neg, sigma_neg)."""

    mu_pos: np.ndarray
    mu_neg: np.ndarray
    sigma_pos: np.ndarray
    sigma_neg: np.ndarray
    prior_pos: float = 0.5

    def __post_init__(self):
        mp = np.atleast_1d(np.asarray(self.mu_pos, float))
        mn = np.atleast_1d(np.asarray(self.mu_neg, float))
        d = mp.shape[0]
        if mn.shape != (d,):
            raise DataError("class means must have equal dimension")
        covs = []
        for name in ("sigma_pos", "sigma_neg"):
            s = np.asarray(getattr(self, name), float)
            if s.ndim == 0:
                s = s * np.eye(d)
            if s.shape != (d, d):
                raise DataError(f"{name} must be {d}x{d}")
            if np.max(np.abs(s - s.T)) > 1e-10:
                raise DataError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(s).min() < -1e-10:
                raise DataError(f"{name} is not positive semidefinite")
            covs.append(s)
        if not 0.0 <= self.prior_pos <= 1.0:
            raise DataError("prior_pos must lie in [0, 1]")
        object.__setattr__(self, "mu_pos", _frozen(mp))
        object.__setattr__(self, "mu_neg", _frozen(mn))
        object.__setattr__(self, "sigma_pos", _frozen(covs[0]))
        object.__setattr__(self, "sigma_neg", _frozen(covs[1]))

    @property
    def dim(self) -> int:
        return self.mu_pos.shape[0]

    @classmethod
    def isotropic(cls, mu, sigma: float) -> "GaussianMixtureDomain":
        """The symmetric setting N(y * mu, sigma^2 I)."""
        mu = np.atleast_1d(np.asarray(mu, float))
        cov = sigma**2 * np.eye(mu.shape[0])
        return cls(mu, -mu, cov, cov, 0.5)

    def sample(self, n: int, rng: np.random.Generator) -> LabeledPoints:
        y = np.where(rng.random(n) < self.prior_pos, 1, -1)
        z = rng.standard_normal((n, self.dim))
        x = np.empty((n, self.dim))
        for label, mu, cov in ((1, self.mu_pos, self.sigma_pos), (-1, self.mu_neg, self.sigma_neg)):
            sel = y == label
            x[sel] = mu + z[sel] @ _sqrt_factor(cov).T
        return LabeledPoints(x, y)


def _sqrt_factor(cov: np.ndarray) -> np.ndarray:
    """A matrix L with L L^T = cov; Cholesky when possible, else eigendecomposition."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_domain(domain: GaussianMixtureDomain, n: int, seed: int) -> LabeledPoints:
    """Draw ``n`` i.i.d. labeled points; identical seeds give identical draws."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return domain.sample(n, np.random.default_rng(seed))


def empirical_distribution(points) -> DiscreteDistribution:
    """Uniform mass on each point, duplicates merged.

    Accepts a :class:`LabeledPoints` or a sequence of ``(x, y)`` pairs.
    """
    if isinstance(points, LabeledPoints):
        x, y = points.x, points.y
    else:
        points = list(points)
        if not points:
            raise ValueError("cannot build an empirical distribution from no points")
        x = np.array([np.atleast_1d(np.asarray(p[0], float)) for p in points])
        y = np.array([p[1] for p in points])
    if len(y) == 0:
        raise ValueError("cannot build an empirical distribution from no points")
    return DiscreteDistribution(x, y)


def second_moment_bound(dist: DiscreteDistribution) -> float:
    """E ||X||^2 under the atom masses (the squared bounded-data constant)."""
    return float(np.dot(dist.masses, np.sum(dist.points**2, axis=1)))


@dataclass(frozen=True)
class DomainSequence:
    """Labeled source, time-ordered unlabeled pools, and a held-out labeled target.

    ``target_unlabeled`` is an optional unlabeled pool drawn from the target
    law, used by direct target adaptation. ``target_eval`` labels are only
    ever read by evaluation code.
    """

    source: LabeledPoints
    intermediate: tuple[np.ndarray, ...]
    target_eval: LabeledPoints
    target_unlabeled: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "intermediate", tuple(_frozen(np.atleast_2d(u)) for u in self.intermediate))
        if self.target_unlabeled is not None:
            object.__setattr__(self, "target_unlabeled", _frozen(np.atleast_2d(self.target_unlabeled)))

    @property
    def dim(self) -> int:
        return self.source.dim

    def flat_intermediate(self) -> np.ndarray:
        if not self.intermediate:
            return np.empty((0, self.dim))
        return np.concatenate(self.intermediate, axis=0)

    def save(self, out_dir) -> None:
        """Write ``source.csv``, ``inter_0001.csv``..., ``target_eval.csv`` and ``meta.json``."""
        import json

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "source.csv", self.source.x, self.source.y)
        for i, u in enumerate(self.intermediate, start=1):
            write_csv(out / f"inter_{i:04d}.csv", u)
        if self.target_unlabeled is not None:
            write_csv(out / "target_unlabeled.csv", self.target_unlabeled)
        write_csv(out / "target_eval.csv", self.target_eval.x, self.target_eval.y)
        (out / "meta.json").write_text(json.dumps(self.metadata, indent=2, sort_keys=True, default=_jsonable))

    @classmethod
    def load(cls, in_dir) -> "DomainSequence":
        import json

        d = Path(in_dir)
        sx, sy = read_csv(d / "source.csv")
        tx, ty = read_csv(d / "target_eval.csv")
        inter = tuple(read_csv(p)[0] for p in sorted(d.glob("inter_*.csv")))
        tu = read_csv(d / "target_unlabeled.csv")[0] if (d / "target_unlabeled.csv").exists() else None
        meta = json.loads((d / "meta.json").read_text()) if (d / "meta.json").exists() else {}
        if sy is None or ty is None:
            raise DataError("source.csv and target_eval.csv must carry a y column")
        return cls(LabeledPoints(sx, sy), inter, LabeledPoints(tx, ty), tu, meta)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_csv(path, x: np.ndarray, y: np.ndarray | None = None, masses: np.ndarray | None = None) -> None:
    """Header ``x0,...,x{d-1}`` followed by optional ``y`` and ``mass`` columns."""
    x = np.atleast_2d(np.asarray(x, float))
    header = [f"x{j}" for j in range(x.shape[1])]
    header += (["y"] if y is not None else []) + (["mass"] if masses is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(x.shape[0]):
            row = [repr(float(v)) for v in x[i]]
            if y is not None:
                row.append(str(int(y[i])))
            if masses is not None:
                row.append(repr(float(masses[i])))
            w.writerow(row)


def read_weighted_csv(path) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Parse a point-cloud CSV into ``(x, y, masses)``; absent columns come back as None."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    weighted = header[-1] == "mass"
    labeled = header[len(header) - weighted - 1] == "y" if len(header) > weighted else False
    nx = len(header) - labeled - weighted
    if nx < 1 or header[:nx] != [f"x{j}" for j in range(nx)]:
        raise DataError(f"{path}:1: header must be x0,...,x{{d-1}}[,y][,mass], got {','.join(header)}")
    xs, ys, ms = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            xs.append([float(c) for c in row[:nx]])
            if labeled:
                yv = int(float(row[nx]))
                if yv not in (-1, 1):
                    raise ValueError
                ys.append(yv)
            if weighted:
                ms.append(float(row[-1]))
        except ValueError:
            raise DataError(f"{path}:{lineno}: cannot parse row {row!r}") from None
    if not xs:
        raise DataError(f"{path}: no data rows")
    return np.array(xs), (np.array(ys) if labeled else None), (np.array(ms) if weighted else None)


def read_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Parse a point-cloud CSV; returns ``(x, y)`` with ``y`` None for unlabeled files."""
    x, y, _ = read_weighted_csv(path)
    return x, y


def points_from_pairs(pairs: Sequence[tuple[Sequence[float], int]]) -> LabeledPoints:
    x = np.array([np.atleast_1d(p[0]) for p in pairs], dtype=float)
    return LabeledPoints(x, np.array([p[1] for p in pairs]))
