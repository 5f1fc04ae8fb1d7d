"""Empirical risk minimisation over norm-bounded linear models.

Three families of solvers live here:

* ``erm_constrained``: convex losses (hinge, logistic) by accelerated projected
  gradient on a smoothed objective; the ramp loss by the concave-convex
  procedure (CCCP) wrapped in random restarts.
* ``erm_exact_1d2d``: exact global minimisation for inputs of dimension one or
  two, used wherever a claim is about true minimisers.
* ``penalized_logistic`` and ``minimize_unlabeled_gaussian`` for the
  experiment path and the Gaussian unlabeled objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize as sopt

from .distributions import DiscreteDistribution, GaussianMixtureDomain
from .models import LinearModel, Loss, loss_fn, sigmoid

__all__ = [
    "SolverError",
    "UnsupportedDimensionError",
    "SolverConfig",
    "TrustRegion",
    "project_ball",
    "project_intersection",
    "erm_objective",
    "erm_constrained",
    "erm_exact_1d2d",
    "penalized_logistic",
    "soft_target_logistic",
    "mc_unlabeled_objective",
    "minimize_unlabeled_gaussian",
    "w_star",
]

TIE_TOL = 1e-10


class SolverError(RuntimeError):
    """Optimisation broke down (non-finite objective); carries the offending iterate."""

    def __init__(self, message: str, iterate=None):
        super().__init__(message if iterate is None else f"{message}; iterate = {np.asarray(iterate).tolist()}")
        self.iterate = iterate


class UnsupportedDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 4000
    step_size: float = 0.1
    step_decay: str = "sqrt"  # "sqrt" -> step_size / sqrt(k), "const"
    method: str = "smoothed"  # "smoothed" (accelerated, Huber-smoothed) or "subgradient"
    restarts: int = 4
    tolerance: float = 1e-9
    grid_resolution: int = 1800
    cccp_rounds: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.step_decay not in ("sqrt", "const"):
            raise ValueError(f"unknown step decay {self.step_decay!r}")
        if self.method not in ("smoothed", "subgradient"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class TrustRegion:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, float))
        if not self.radius > 0:
            raise ValueError("trust radius must be positive")


# ---------------------------------------------------------------------------
# projections


def project_ball(w: np.ndarray, R: float | None, center=None) -> np.ndarray:
    if R is None:
        return w
    c = 0.0 if center is None else center
    v = w - c
    n = np.linalg.norm(v)
    return w if n <= R else c + v * (R / n)


def project_intersection(w, R: float, center, radius: float, rounds: int = 100, tol: float = 1e-10):
    """Alternating projections onto {||w|| <= R} and {||w - center|| <= radius}."""
    w = np.asarray(w, float)
    for _ in range(rounds):
        w = project_ball(project_ball(w, radius, center), R)
        if np.linalg.norm(w - center) <= radius * (1 + tol) + tol:
            return w
    return w


# ---------------------------------------------------------------------------
# objectives


def _as_arrays(data: DiscreteDistribution):
    return data.points, data.labels.astype(float), data.masses


def erm_objective(kind: Loss | str, model: LinearModel, data: DiscreteDistribution) -> float:
    m = data.labels * model.scores(data.points)
    return float(np.dot(data.masses, loss_fn(kind, m)))


def _smoothed_terms(kind: Loss, m: np.ndarray, mu: float):
    """Value and derivative (w.r.t. the margin) of the smoothed convex loss."""
    if kind is Loss.LOGISTIC:
        return np.logaddexp(0.0, -m), -sigmoid(-m)
    # Huber-smoothed hinge: quadratic on (1 - mu, 1)
    u = 1.0 - m
    val = np.where(u <= 0, 0.0, np.where(u < mu, u * u / (2 * mu), u - mu / 2))
    der = np.where(u <= 0, 0.0, np.where(u < mu, -u / mu, -1.0))
    return val, der


def _convex_descent(kind: Loss, x, y, c, lin, R, theta0, cfg: SolverConfig):
    """Minimise sum_i c_i [loss(m_i) + lin_i m_i] over ||w|| <= R, b free.

    ``m_i = y_i (w.x_i + b)``. Returns the best iterate under the true
    (unsmoothed) objective.
    """
    d = x.shape[1]
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    yx = xa * y[:, None]

    def true_obj(theta):
        m = yx @ theta
        return float(np.dot(c, loss_fn(kind, m) + lin * m))

    def proj(theta):
        out = theta.copy()
        out[:d] = project_ball(theta[:d], R)
        return out

    theta = proj(np.asarray(theta0, float))
    best, best_val = theta.copy(), true_obj(theta)
    if not np.isfinite(best_val):
        raise SolverError("non-finite objective at start", theta)

    if cfg.method == "subgradient":
        for k in range(1, cfg.max_iters + 1):
            m = yx @ theta
            _, der = _smoothed_terms(kind, m, 1e-12)
            g = yx.T @ (c * (der + lin))
            step = cfg.step_size / (np.sqrt(k) if cfg.step_decay == "sqrt" else 1.0)
            theta = proj(theta - step * g)
            v = true_obj(theta)
            if not np.isfinite(v):
                raise SolverError("non-finite objective during subgradient descent", theta)
            if v < best_val:
                best, best_val = theta.copy(), v
        return best, best_val

    lip_data = float(np.dot(c, np.sum(xa * xa, axis=1)))
    if kind is Loss.LOGISTIC:
        stages = [None]
    else:
        stages = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    iters = max(1, cfg.max_iters // len(stages))
    for mu in stages:
        L = lip_data * (0.25 if mu is None else 1.0 / mu)
        L = max(L, 1e-12)
        z, t, prev = theta.copy(), 1.0, theta.copy()
        prev_val = np.inf
        for k in range(iters):
            m = yx @ z
            val, der = _smoothed_terms(kind, m, mu or 0.0)
            g = yx.T @ (c * (der + lin))
            nxt = proj(z - g / L)
            nval = float(np.dot(c, _smoothed_terms(kind, yx @ nxt, mu or 0.0)[0] + lin * (yx @ nxt)))
            if not np.isfinite(nval):
                raise SolverError("non-finite objective during accelerated descent", nxt)
            if nval > prev_val:  # adaptive restart
                t, z = 1.0, prev.copy()
                continue
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            z = nxt + ((t - 1) / t_next) * (nxt - prev)
            if abs(prev_val - nval) <= cfg.tolerance * max(1.0, abs(nval)) and k > 10:
                prev, prev_val = nxt, nval
                break
            prev, prev_val, t = nxt, nval, t_next
        theta = prev
        v = true_obj(theta)
        if v < best_val:
            best, best_val = theta.copy(), v
    return best, best_val


def _closer(a: np.ndarray, b: np.ndarray, ref: np.ndarray | None) -> bool:
    if ref is None:
        return False
    return np.linalg.norm(a - ref) < np.linalg.norm(b - ref)


def erm_constrained(
    kind: Loss | str,
    data: DiscreteDistribution,
    R: float,
    cfg: SolverConfig | None = None,
    warm_start: LinearModel | None = None,
    trace: list | None = None,
) -> LinearModel:
    """Minimise the empirical margin loss over ``||w|| <= R``.

    Hinge and logistic are convex and solved directly from the warm start.
    The ramp loss ``r(m) = h(m) - max(-m, 0)`` is handled by CCCP from the
    warm start and from ``cfg.restarts`` random feasible points; the best
    result is returned, ties going to the one closest to the warm start. The
    returned objective never exceeds the warm start's. If ``trace`` is given,
    the per-round CCCP objectives of the warm-started run are appended to it.
    """
    kind = Loss(kind)
    cfg = cfg or SolverConfig()
    if not R > 0:
        raise ValueError("R must be positive")
    if len(data) == 0:
        raise ValueError("empty training data")
    x, y, c = _as_arrays(data)
    d = x.shape[1]
    ref = None
    if warm_start is not None:
        if warm_start.dim != d:
            raise ValueError("warm start dimension mismatch")
        ref = warm_start.params()
        ref = np.append(project_ball(ref[:d], R), ref[d])
    start = ref if ref is not None else np.zeros(d + 1)

    def obj(theta):
        m = y * (x @ theta[:d] + theta[d])
        return float(np.dot(c, loss_fn(kind, m)))

    if kind is not Loss.RAMP:
        theta, val = _convex_descent(kind, x, y, c, np.zeros_like(c), R, start, cfg)
        if ref is not None and obj(ref) <= val:
            theta = ref
        return LinearModel(theta[:d], theta[d], R)

    rng = np.random.default_rng(cfg.seed)
    starts = [start]
    scale = max(1.0, float(np.max(np.abs(x @ np.ones(d)))) if d else 1.0)
    for _ in range(cfg.restarts):
        w = rng.standard_normal(d)
        w *= R * rng.random() ** (1.0 / d) / max(np.linalg.norm(w), 1e-300)
        starts.append(np.append(w, rng.uniform(-scale, scale)))

    best, best_val = None, np.inf
    for i, s in enumerate(starts):
        theta, val = _cccp(x, y, c, R, s, cfg, trace if i == 0 else None)
        if val < best_val - TIE_TOL or (abs(val - best_val) <= TIE_TOL and _closer(theta, best, ref)):
            best, best_val = theta, val
    if ref is not None and obj(ref) <= best_val:
        best = ref
    return LinearModel(best[:d], best[d], R)


def _cccp(x, y, c, R, theta0, cfg: SolverConfig, trace=None):
    d = x.shape[1]
    theta = np.append(project_ball(theta0[:d], R), theta0[d])

    def obj(th):
        return float(np.dot(c, loss_fn(Loss.RAMP, y * (x @ th[:d] + th[d]))))

    val = obj(theta)
    if trace is not None:
        trace.append(val)
    for _ in range(cfg.cccp_rounds):
        m = y * (x @ theta[:d] + theta[d])
        # linearise -max(-m, 0): points currently misclassified get +m added to the hinge
        lin = (m < 0).astype(float)
        cand, _ = _convex_descent(Loss.HINGE, x, y, c, lin, R, theta, cfg)
        cval = obj(cand)
        if cval >= val - cfg.tolerance:
            if cval < val:
                theta, val = cand, cval
            if trace is not None:
                trace.append(val)
            break
        theta, val = cand, cval
        if trace is not None:
            trace.append(val)
    return theta, val


# ---------------------------------------------------------------------------
# exact solver for d <= 2


def _kink_levels(kind: Loss) -> tuple[float, ...]:
    return (0.0, 1.0) if kind is Loss.RAMP else (1.0,)


def _exact_1d_candidates(proj: np.ndarray, y: np.ndarray, kind: Loss, R: float, bias_range):
    """All vertices of the kink-line arrangement for the problem in (s, b), |s| <= R.

    ``proj`` has shape (A, n): A independent 1-D problems (one per direction).
    Returns candidate arrays ``s`` and ``b`` of shape (A, K).
    """
    A, n = proj.shape
    # each line: s * a + b = r, stored as (a, coefficient on b = 1, r)
    slopes, rhs = [], []
    for lev in _kink_levels(kind):
        slopes.append(proj)
        rhs.append(np.broadcast_to(lev * y, (A, n)))
    a = np.concatenate(slopes, axis=1)  # (A, L)
    r = np.concatenate(rhs, axis=1)
    # s = +-R boundary lines intersected with every kink line
    s_list = [np.full_like(a, R), np.full_like(a, -R)]
    b_list = [r - R * a, r + R * a]
    # pairwise kink-line intersections: s (a_i - a_j) = r_i - r_j
    i, j = np.triu_indices(a.shape[1], k=1)
    da = a[:, i] - a[:, j]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (r[:, i] - r[:, j]) / da
        b = r[:, i] - s * a[:, i]
    ok = np.abs(da) > 1e-14
    s = np.where(ok, s, np.nan)
    s_list.append(s)
    b_list.append(b)
    if bias_range is not None:
        lo, hi = bias_range
        for bv in (lo, hi):
            # b = bv lines against kink lines and the s boundaries
            with np.errstate(divide="ignore", invalid="ignore"):
                sv = np.where(np.abs(a) > 1e-14, (r - bv) / a, np.nan)
            s_list += [sv, np.array([[R, -R]] * A)]
            b_list += [np.full_like(sv, bv), np.full((A, 2), bv)]
    s = np.concatenate(s_list, axis=1)
    b = np.concatenate(b_list, axis=1)
    bad = ~np.isfinite(s) | (np.abs(s) > R * (1 + 1e-12))
    if bias_range is not None:
        bad |= (b < bias_range[0] - 1e-12) | (b > bias_range[1] + 1e-12)
    s = np.where(bad, np.nan, np.clip(s, -R, R))
    return s, b


def _eval_candidates(proj, y, c, kind, s, b):
    # proj (A, n); s, b (A, K) -> objective (A, K)
    m = y[None, None, :] * (s[:, :, None] * proj[:, None, :] + b[:, :, None])
    vals = np.einsum("akn,n->ak", loss_fn(kind, m), c)
    return np.where(np.isnan(s), np.inf, vals)


def erm_exact_1d2d(
    kind: Loss | str,
    data: DiscreteDistribution,
    R: float,
    grid: int = 1800,
    bias_range: tuple[float, float] | None = None,
    warm_start: LinearModel | None = None,
    refine_rounds: int = 3,
) -> LinearModel:
    """Global minimiser of the empirical margin loss for d <= 2 and few atoms.

    For hinge and ramp the objective is piecewise linear in (w, b) along any
    fixed direction of ``w``, so its minimum over ``|s| <= R`` is attained at a
    vertex of the arrangement of kink lines; those vertices are enumerated
    exactly. In 1-D that is the whole problem. In 2-D the direction of ``w``
    ranges over an angle grid (plus the warm start's direction), refined
    around the best angle. The logistic loss is smooth and convex and is
    handled by a constrained quasi-Newton solve. Ties go to the candidate
    nearest the warm start.
    """
    kind = Loss(kind)
    d = data.dim
    if d > 2:
        raise UnsupportedDimensionError(f"exact solver supports d <= 2, got d = {d}")
    if len(data) > 64:
        raise ValueError(f"exact solver supports at most 64 atoms, got {len(data)}")
    x, y, c = _as_arrays(data)
    ref = None if warm_start is None else warm_start.params()

    if kind is Loss.LOGISTIC:
        return _exact_logistic(x, y, c, R, ref)

    if d == 1:
        dirs = np.array([[1.0]])
    else:
        phis = np.pi * np.arange(grid) / grid
        if ref is not None and np.linalg.norm(ref[:2]) > 0:
            phis = np.append(phis, np.arctan2(ref[1], ref[0]) % np.pi)
        dirs = np.stack([np.cos(phis), np.sin(phis)], axis=1)

    def solve(dirs):
        proj = dirs @ x.T
        s, b = _exact_1d_candidates(proj, y, kind, R, bias_range)
        vals = _eval_candidates(proj, y, c, kind, s, b)
        return s, b, vals

    s, b, vals = solve(dirs)
    if d == 2:
        step = np.pi / grid
        for _ in range(refine_rounds):
            a_best = np.unravel_index(np.argmin(vals), vals.shape)[0]
            phi0 = np.arctan2(dirs[a_best, 1], dirs[a_best, 0])
            phis = phi0 + np.linspace(-step, step, 41)
            step = step / 20
            nd = np.stack([np.cos(phis), np.sin(phis)], axis=1)
            ns, nb, nv = solve(nd)
            dirs = np.vstack([dirs, nd])
            s, b, vals = np.vstack([s, ns]), np.vstack([b, nb]), np.vstack([vals, nv])

    w_all = s[:, :, None] * dirs[:, None, :]
    flat_w = w_all.reshape(-1, d)
    flat_b = b.reshape(-1)
    flat_v = vals.reshape(-1)
    if ref is not None:
        wr = project_ball(ref[:d], R)
        flat_w = np.vstack([flat_w, wr])
        flat_b = np.append(flat_b, ref[d])
        flat_v = np.append(flat_v, np.dot(c, loss_fn(kind, y * (x @ wr + ref[d]))))
    vmin = flat_v.min()
    tied = np.flatnonzero(flat_v <= vmin + TIE_TOL)
    if ref is not None:
        dist = np.linalg.norm(np.column_stack([flat_w[tied], flat_b[tied]]) - ref, axis=1)
        k = tied[np.argmin(dist)]
    else:
        # prefer the smallest-norm parameters among ties
        k = tied[np.argmin(np.linalg.norm(np.column_stack([flat_w[tied], flat_b[tied]]), axis=1))]
    w = flat_w[k]
    nw = np.linalg.norm(w)
    if nw > R:
        w = w * (R / nw)
    return LinearModel(w, flat_b[k], R)


def _exact_logistic(x, y, c, R, ref):
    warm = None if ref is None else LinearModel(project_ball(ref[:-1], R), ref[-1], R)
    return soft_target_logistic(x, (y > 0).astype(float), c, R, warm)


def soft_target_logistic(x, targets, masses, R: float, warm_start: LinearModel | None = None) -> LinearModel:
    """Mass-weighted cross-entropy against target probabilities over ``||w|| <= R``.

    Smooth and convex, solved by SLSQP with the norm budget as a quadratic
    inequality constraint.
    """
    x = np.asarray(x, float)
    t = np.asarray(targets, float)
    c = np.asarray(masses, float)
    d = x.shape[1]

    def f(theta):
        s = x @ theta[:d] + theta[d]
        # -[t log sig(s) + (1 - t) log sig(-s)]
        return float(np.dot(c, t * np.logaddexp(0.0, -s) + (1 - t) * np.logaddexp(0.0, s)))

    def g(theta):
        s = x @ theta[:d] + theta[d]
        coef = c * (sigmoid(s) - t)
        return np.append(x.T @ coef, coef.sum())

    cons = [{"type": "ineq", "fun": lambda th: R * R - th[:d] @ th[:d], "jac": lambda th: np.append(-2 * th[:d], 0.0)}]
    x0 = np.zeros(d + 1) if warm_start is None else np.append(project_ball(warm_start.w, R), warm_start.b)
    res = sopt.minimize(f, x0, jac=g, constraints=cons, method="SLSQP", options={"ftol": 1e-15, "maxiter": 2000})
    theta = res.x if f(res.x) <= f(x0) else x0
    if not np.all(np.isfinite(theta)):
        raise SolverError("non-finite iterate in soft-target logistic solve", theta)
    return LinearModel(project_ball(theta[:d], R), theta[d], R)


# ---------------------------------------------------------------------------
# penalised logistic regression (experiment path)


def penalized_logistic(
    x: np.ndarray,
    targets: np.ndarray,
    lam: float,
    epochs: int,
    seed: int = 0,
    warm_start: LinearModel | None = None,
    batch_size: int = 32,
    lr: float = 1e-3,
) -> LinearModel:
    """Mean logistic loss + ``lam * ||w||^2`` by mini-batch Adam.

    ``targets`` are probabilities of the positive class: hard labels in
    {-1, +1} are mapped to {0, 1}; values already in [0, 1] are used as soft
    targets. Mini-batch order is a deterministic function of ``seed``.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    x = np.asarray(x, float)
    t = np.asarray(targets, float)
    if np.any(t < 0):
        t = (t > 0).astype(float)
    n, d = x.shape
    theta = np.zeros(d + 1) if warm_start is None else warm_start.params().copy()
    xa = np.hstack([x, np.ones((n, 1))])
    reg = np.append(np.full(d, 2.0 * lam), 0.0)
    m1 = np.zeros(d + 1)
    m2 = np.zeros(d + 1)
    b1, b2, eps = 0.9, 0.999, 1e-7
    rng = np.random.default_rng(seed)
    step = 0
    bs = min(batch_size, n)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            xb = xa[idx]
            p = sigmoid(xb @ theta)
            g = xb.T @ (p - t[idx]) / len(idx) + reg * theta
            step += 1
            m1 = b1 * m1 + (1 - b1) * g
            m2 = b2 * m2 + (1 - b2) * g * g
            theta = theta - lr * (m1 / (1 - b1**step)) / (np.sqrt(m2 / (1 - b2**step)) + eps)
        if not np.all(np.isfinite(theta)):
            raise SolverError("logistic regression diverged", theta)
    return LinearModel(theta[:d], theta[d], None)


# ---------------------------------------------------------------------------
# the unlabeled Gaussian objective


def w_star(mu) -> np.ndarray:
    """The Bayes-optimal direction mu / ||mu||."""
    mu = np.asarray(mu, float)
    n = np.linalg.norm(mu)
    if n == 0:
        raise ValueError("w_star is undefined at mu = 0")
    return mu / n


def mc_unlabeled_objective(phi: Loss | str, w: np.ndarray, x: np.ndarray) -> float:
    return float(np.mean(loss_fn(phi, np.abs(x @ w))))


def _phi_slope(phi: Loss, s: np.ndarray) -> np.ndarray:
    """Derivative of phi at s >= 0."""
    if phi is Loss.LOGISTIC:
        return -sigmoid(-s)
    inside = s < 1.0
    if phi is Loss.RAMP:
        return np.where(inside, -1.0, 0.0)
    return np.where(inside, -1.0, 0.0)


def minimize_unlabeled_gaussian(
    phi: Loss | str,
    domain: GaussianMixtureDomain,
    ball_R: float,
    trust: TrustRegion,
    mc_samples: int,
    cfg: SolverConfig | None = None,
) -> np.ndarray:
    """argmin of the Monte-Carlo estimate of E[phi(|w.X|)] over the ball-and-trust-region set.

    Projected gradient descent with alternating projections; multi-start from
    the trust-region centre and ``cfg.restarts`` random feasible points.
    """
    phi = Loss(phi)
    cfg = cfg or SolverConfig()
    if mc_samples < 1000:
        raise ValueError("mc_samples must be at least 1000")
    c = trust.center
    if trust.radius > 1 or np.linalg.norm(c) > 1 + 1e-12:
        raise ValueError("trust region must have radius <= 1 and centre inside the unit ball")
    if np.linalg.norm(c) > ball_R + trust.radius:
        raise ValueError("trust region does not meet the norm ball")
    rng = np.random.default_rng(cfg.seed)
    x = domain.sample(mc_samples, rng).x
    d = x.shape[1]

    def proj(w):
        return project_intersection(w, ball_R, c, trust.radius)

    def value(w):
        return mc_unlabeled_objective(phi, w, x)

    starts = [proj(c.copy())]
    for _ in range(cfg.restarts):
        v = rng.standard_normal(d)
        v *= trust.radius * rng.random() ** (1.0 / d) / np.linalg.norm(v)
        starts.append(proj(c + v))

    scale = float(np.mean(np.sum(x * x, axis=1)))
    best, best_val = None, np.inf
    for w in starts:
        cur, cur_val = w, value(w)
        step0 = cfg.step_size / max(scale, 1e-12) ** 0.5
        for k in range(1, cfg.max_iters + 1):
            s = x @ cur
            g = x.T @ (_phi_slope(phi, np.abs(s)) * np.sign(s)) / len(s)
            gn = np.linalg.norm(g)
            if gn == 0:
                break
            step = step0 / (np.sqrt(k) if cfg.step_decay == "sqrt" else 1.0)
            nxt = proj(cur - step * g / gn)
            nv = value(nxt)
            if nv < cur_val:
                cur, cur_val = nxt, nv
            elif step < cfg.tolerance:
                break
        if cur_val < best_val - TIE_TOL or (abs(cur_val - best_val) <= TIE_TOL and _closer(cur, best, c)):
            best, best_val = cur, cur_val
    return best
