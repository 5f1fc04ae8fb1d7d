"""Generators for gradually shifting domain sequences and for small adversarial constructions.

Sampled sequences (Gaussian drift, mixing, rotation) are returned as
:class:`DomainSequence` objects. The margin-theory constructions are exact
finitely supported distributions returned as a :class:`Counterexample`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    DiscreteDistribution,
    DomainSequence,
    GaussianMixtureDomain,
    LabeledPoints,
    _sqrt_factor,
)
from .models import LinearModel

__all__ = [
    "GaussianDriftSpec",
    "haar_rotation",
    "random_covariance",
    "gen_gaussian_drift",
    "drift_endpoints",
    "gen_mixing_interpolation",
    "gen_rotation_drift",
    "rotate2d",
    "CounterexampleSpec",
    "Counterexample",
    "gen_counterexample",
    "exponential_steps",
]


def haar_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs fixed by diag(R))."""
    z = rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))


def random_covariance(d: int, min_var: float, max_var: float, rng: np.random.Generator) -> np.ndarray:
    u = haar_rotation(d, rng)
    eig = rng.uniform(min_var, max_var, size=d)
    cov = (u * eig) @ u.T
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class GaussianDriftSpec:
    d: int = 100
    n_labeled: int = 500
    n_unlabeled: int = 5000
    min_var: float = 0.05
    max_var: float = 0.1
    n_target_eval: int = 1000
    n_target_unlabeled: int | None = None  # defaults to n_unlabeled
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not 0 < self.min_var <= self.max_var:
            raise ValueError("need 0 < min_var <= max_var")
        for name in ("n_labeled", "n_unlabeled", "n_target_eval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_target_unlabeled is not None and self.n_target_unlabeled < 1:
            raise ValueError("n_target_unlabeled must be >= 1")


def drift_endpoints(spec: GaussianDriftSpec, rng: np.random.Generator):
    """Random source and target class-conditional parameters (means N(0, I), covariances U D U^T)."""
    d = spec.d
    mu = {k: rng.standard_normal(d) for k in ("src_pos", "src_neg", "tgt_pos", "tgt_neg")}
    cov = {k: random_covariance(d, spec.min_var, spec.max_var, rng) for k in ("src_pos", "src_neg", "tgt_pos", "tgt_neg")}
    src = GaussianMixtureDomain(mu["src_pos"], mu["src_neg"], cov["src_pos"], cov["src_neg"], 0.5)
    tgt = GaussianMixtureDomain(mu["tgt_pos"], mu["tgt_neg"], cov["tgt_pos"], cov["tgt_neg"], 0.5)
    return src, tgt


def _interpolated_draws(src: GaussianMixtureDomain, tgt: GaussianMixtureDomain, frac: np.ndarray, rng) -> np.ndarray:
    """One point per entry of ``frac``; point i comes from the domain interpolated at frac[i].

    Means and covariances are interpolated linearly. A draw with covariance
    (1 - f) S0 + f S1 is obtained as sqrt(1 - f) A0 z0 + sqrt(f) A1 z1 with
    A A^T = S, which keeps sampling vectorised.
    """
    n, d = frac.shape[0], src.dim
    y = np.where(rng.random(n) < 0.5, 1, -1)
    z0 = rng.standard_normal((n, d))
    z1 = rng.standard_normal((n, d))
    x = np.empty((n, d))
    for label, (m0, s0, m1, s1) in {
        1: (src.mu_pos, src.sigma_pos, tgt.mu_pos, tgt.sigma_pos),
        -1: (src.mu_neg, src.sigma_neg, tgt.mu_neg, tgt.sigma_neg),
    }.items():
        sel = y == label
        f = frac[sel][:, None]
        a0, a1 = _sqrt_factor(s0), _sqrt_factor(s1)
        x[sel] = (1 - f) * m0 + f * m1 + np.sqrt(1 - f) * (z0[sel] @ a0.T) + np.sqrt(f) * (z1[sel] @ a1.T)
    return x


def gen_gaussian_drift(spec: GaussianDriftSpec) -> DomainSequence:
    """Two-class Gaussians whose means and covariances drift linearly from source to target.

    The i-th of the ``n_unlabeled`` points (i = 1..T) is drawn at
    interpolation fraction i/T, so the unlabeled stream ends at the target
    law. A separate unlabeled pool of ``n_target_unlabeled`` target draws is
    included for direct target adaptation.
    """
    rng = np.random.default_rng(spec.seed)
    src, tgt = drift_endpoints(spec, rng)
    source = src.sample(spec.n_labeled, rng)
    frac = np.arange(1, spec.n_unlabeled + 1) / spec.n_unlabeled
    stream = _interpolated_draws(src, tgt, frac, rng)
    n_tu = spec.n_target_unlabeled or spec.n_unlabeled
    target_unlabeled = tgt.sample(n_tu, rng).x
    target_eval = tgt.sample(spec.n_target_eval, rng)
    meta = {"generator": "gaussian_drift", "spec": spec.__dict__.copy(), "seed": spec.seed}
    return DomainSequence(source, (stream,), target_eval, target_unlabeled, meta)


def gen_mixing_interpolation(
    source_domain: GaussianMixtureDomain,
    target_domain: GaussianMixtureDomain,
    n_domains: int,
    n_per_domain: int,
    seed: int,
    n_labeled: int = 500,
    n_target_eval: int = 1000,
) -> DomainSequence:
    """Intermediate domain i (1..K) is the mixture (1 - i/K) source + (i/K) target.

    Every point follows one of the two endpoint laws; nothing is
    interpolated. Successive domains are close in total variation yet far
    apart in W-infinity.
    """
    if n_domains < 1:
        raise ValueError("n_domains must be >= 1")
    if n_per_domain < 1:
        raise ValueError("n_per_domain must be >= 1")
    rng = np.random.default_rng(seed)
    source = source_domain.sample(n_labeled, rng)
    inter = []
    for i in range(1, n_domains + 1):
        n_tgt = int(rng.binomial(n_per_domain, i / n_domains))
        parts = [dom.sample(k, rng).x for dom, k in ((source_domain, n_per_domain - n_tgt), (target_domain, n_tgt)) if k > 0]
        xs = np.concatenate(parts)
        inter.append(xs[rng.permutation(n_per_domain)])
    target_unlabeled = target_domain.sample(n_domains * n_per_domain, rng).x
    target_eval = target_domain.sample(n_target_eval, rng)
    meta = {
        "generator": "mixing_interpolation",
        "n_domains": n_domains,
        "n_per_domain": n_per_domain,
        "n_labeled": n_labeled,
        "seed": seed,
    }
    return DomainSequence(source, tuple(inter), target_eval, target_unlabeled, meta)


def rotate2d(x: np.ndarray, angle_deg: float) -> np.ndarray:
    a = np.deg2rad(angle_deg)
    rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    return np.asarray(x, float) @ rot.T


def _sector_cloud(n: int, radius_band, rng) -> LabeledPoints:
    """Positive class at angles [20, 60] U [120, 160] degrees; negatives mirrored through the origin.

    Opposite classes are 40 degrees apart, so a hinge model with unit norm
    keeps zero loss over a band of directions wider than one 5 degree step,
    while a 60 degree rotation carries a whole sector across the horizontal.
    """
    y = np.where(rng.random(n) < 0.5, 1, -1)
    ang = rng.uniform(20.0, 60.0, n) + np.where(rng.random(n) < 0.5, 0.0, 100.0)
    ang = ang + np.where(y > 0, 0.0, 180.0)
    r = rng.uniform(radius_band[0], radius_band[1], n)
    a = np.deg2rad(ang)
    return LabeledPoints(np.column_stack([r * np.cos(a), r * np.sin(a)]), y)


def gen_rotation_drift(
    n_points: int,
    n_domains: int,
    total_angle_deg: float,
    radius_band: tuple[float, float] = (8.0, 10.0),
    seed: int = 0,
    n_target_eval: int = 1000,
) -> DomainSequence:
    """Two-class 2-D cloud rotated by t * (total_angle / n_domains) in domain t.

    The labeled source is the unrotated cloud. Intermediate domain t
    (1..n_domains) is the same cloud rotated by t steps, so consecutive
    domains are at W-infinity distance at most 2 r_max sin(step / 2). The
    last intermediate domain is the target law; the target pool is a copy of
    it and the evaluation set is a fresh cloud under the full rotation.
    """
    if not 0 <= total_angle_deg < 180:
        raise ValueError("total_angle_deg must lie in [0, 180)")
    if n_domains < 1 or n_points < 1:
        raise ValueError("n_domains and n_points must be >= 1")
    lo, hi = radius_band
    if not 0 < lo <= hi:
        raise ValueError("radius band must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    base = _sector_cloud(n_points, radius_band, rng)
    step = total_angle_deg / n_domains
    inter = tuple(rotate2d(base.x, t * step) for t in range(1, n_domains + 1))
    fresh = _sector_cloud(n_target_eval, radius_band, rng)
    target_eval = LabeledPoints(rotate2d(fresh.x, total_angle_deg), fresh.y)
    meta = {
        "generator": "rotation_drift",
        "n_points": n_points,
        "n_domains": n_domains,
        "total_angle_deg": total_angle_deg,
        "radius_band": list(radius_band),
        "step_winf_bound": 2 * hi * np.sin(np.deg2rad(step) / 2),
        "seed": seed,
    }
    return DomainSequence(base, inter, target_eval, inter[-1].copy(), meta)


# ---------------------------------------------------------------------------
# exact constructions


@dataclass(frozen=True)
class CounterexampleSpec:
    """One of ``baselines_fail``, ``exponential``, ``hinge_bad``, ``no_shift_doubling``.

    Parameters: ``alpha0`` and ``T`` (exponential), ``alpha`` (hinge_bad),
    ``alpha0`` and ``eps`` (no_shift_doubling). ``sabotage`` corrupts the
    construction so that a claimed value no longer holds; it exists only to
    test that checks can fail.
    """

    kind: str
    alpha0: float | None = None
    T: int | None = None
    alpha: float | None = None
    eps: float | None = None
    sabotage: bool = False

    def __post_init__(self):
        k = self.kind
        if k == "baselines_fail":
            return
        if k == "exponential":
            if self.alpha0 is None or self.T is None:
                raise ValueError("exponential needs alpha0 and T")
            if not 0 < self.alpha0 <= 0.25:
                raise ValueError(f"exponential needs 0 < alpha0 <= 1/4, got alpha0 = {self.alpha0}")
            if self.T < 1:
                raise ValueError("exponential needs T >= 1")
        elif k == "hinge_bad":
            if self.alpha is None or not self.alpha > 0:
                raise ValueError("hinge_bad needs alpha > 0")
        elif k == "no_shift_doubling":
            if self.alpha0 is None or self.eps is None:
                raise ValueError("no_shift_doubling needs alpha0 and eps")
            if not 0 < self.eps < self.alpha0 < 0.25:
                raise ValueError(
                    f"no_shift_doubling needs 0 < eps < alpha0 < 1/4, got eps = {self.eps}, alpha0 = {self.alpha0}"
                )
        else:
            raise ValueError(f"unknown construction {k!r}")


@dataclass(frozen=True)
class Counterexample:
    distributions: list[DiscreteDistribution]
    theta0: LinearModel
    R: float
    expected: dict = field(default_factory=dict)


def _dist(atoms) -> DiscreteDistribution:
    """Build from (x, y, mass) triples, x scalar or tuple; zero-mass atoms are dropped."""
    atoms = [a for a in atoms if a[2] > 0]
    pts = np.array([np.atleast_1d(np.asarray(a[0], float)) for a in atoms])
    return DiscreteDistribution(pts, np.array([a[1] for a in atoms]), np.array([a[2] for a in atoms], float))


def _flip_last(dists: list[DiscreteDistribution]) -> list[DiscreteDistribution]:
    last = dists[-1]
    return dists[:-1] + [last.relabel(-last.labels)]


def exponential_steps(alpha0: float) -> tuple[int, list[float], float]:
    """S (largest integer with (2^(S-1) + 1/2) alpha0 < 1/2), the moving masses and the spacing delta."""
    S = 1
    while (2 ** S + 0.5) * alpha0 < 0.5:
        S += 1
    weights = [0.5 * 2**i * alpha0 for i in range(S)] + [0.5 - (2 ** (S - 1) + 0.5) * alpha0]
    return S, weights, 1.0 / (10 * S)


def _exponential(alpha0: float, T: int) -> list[DiscreteDistribution]:
    S, w, delta = exponential_steps(alpha0)
    out: dict[int, DiscreteDistribution] = {}
    for t in range(0, min(T, S + 1) + 1):
        left = alpha0 + sum(w[:t])
        out[2 * t] = _dist([(-10.0, -1, 0.5), (-0.1, 1, left)] + [(1 + i * delta, 1, w[i]) for i in range(t, S + 1)])
        if t < min(T, S + 1):
            out[2 * t + 1] = _dist(
                [(-10.0, -1, 0.5), (-0.1, 1, left), (0.5, 1, w[t])]
                + [(1 + i * delta, 1, w[i]) for i in range(t + 1, S + 1)]
            )
    last = max(out)
    return [out[i] if i in out else out[last] for i in range(2 * T + 1)]


def _q_delta(delta: float, a0: float) -> DiscreteDistribution:
    far = (1 - a0) / a0
    return _dist(
        [
            ((delta, 1.0), 1, (1 - a0) / 2),
            ((-0.5, far), 1, a0 / 2),
            ((-delta, -1.0), -1, (1 - a0) / 2),
            ((0.5, -far), -1, a0 / 2),
        ]
    )


def gen_counterexample(spec: CounterexampleSpec) -> Counterexample:
    """Exact distributions, starting model and claimed values for a construction."""
    k = spec.kind
    if k == "baselines_fail":
        dists = [
            _dist([((1.0, 1.0), 1, 0.5), ((-1.0, -1.0), -1, 0.5)]),
            _dist([((1.0, 1 / 3), 1, 0.5), ((-1.0, -1 / 3), -1, 0.5)]),
            _dist([((1.0, -1 / 3), 1, 0.5), ((-1.0, 1 / 3), -1, 0.5)]),
        ]
        if spec.sabotage:
            # the target mirrors back onto the middle domain
            dists[2] = dists[1]
        theta0 = LinearModel([0.0, 1.0], 0.0, 1.0)
        expected = {"source_loss": 0.0, "target_loss": 1.0, "st_target_loss": 1.0, "rho": 2 / 3,
                    "witness": LinearModel([1.0, 0.0], 0.0, 1.0)}
    elif k == "exponential":
        dists = _exponential(spec.alpha0, spec.T)
        theta0 = LinearModel([1.0], 0.0, 1.0)
        expected = {"final_loss_lower": min(0.5, 0.5 * 2**spec.T * spec.alpha0), "winf_max": 0.6,
                    "witness": LinearModel([1.0], 5.0, 1.0), "initial_loss": spec.alpha0}
    elif k == "hinge_bad":
        a0 = min(0.5, 2 * spec.alpha / 3)
        dists = [_q_delta(1.0, a0), _q_delta(1 / 3, a0), _q_delta(-1 / 3, a0)]
        theta0 = LinearModel([1.0, 0.0], 0.0, 1.0)
        expected = {"alpha0": a0, "initial_hinge": 1.5 * a0, "final_error": 1.0, "rho_max": 2 / 3,
                    "witness": LinearModel([0.0, 1.0], 0.0, 1.0)}
    else:
        delta = spec.eps / 3
        a = spec.alpha0 / (1 + delta)
        m0, m1 = (a - delta, a) if spec.sabotage else (a, a - delta)
        dists = [_dist([(-10.0, -1, 0.5), (0.0, 1, m0), (1.0, 1, m1), (10.0, 1, 0.5 - 2 * a + delta)])]
        theta0 = LinearModel([1.0], -delta, 1.0)
        expected = {"initial_loss": spec.alpha0 - delta**2, "final_loss_lower": 2 * spec.alpha0 - spec.eps,
                    "after_one_step": 2 * a - delta}
    if spec.sabotage and k in ("exponential", "hinge_bad"):
        dists = _flip_last(dists)
    return Counterexample(dists, theta0, 1.0, expected)
