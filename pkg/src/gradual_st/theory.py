"""Executable checks of the margin-loss and Gaussian self-training claims.

Every check returns a :class:`VerificationResult`. Margin-loss checks decide
pass/fail with the exact low-dimensional solver, so a verdict never rests on
a local optimiser; heuristic (CCCP) runs are attached as advisory
diagnostics only. A solver failure yields ``inconclusive``, never ``fail``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .distributions import DiscreteDistribution, GaussianMixtureDomain, second_moment_bound
from .models import LinearModel, Loss, loss_fn, population_loss, soft_label_loss, unlabeled_loss, zero_one_error
from .optimize import (
    SolverConfig,
    SolverError,
    TrustRegion,
    erm_exact_1d2d,
    minimize_unlabeled_gaussian,
    project_ball,
    w_star,
)
from .selftrain import SelfTrainConfig, gradual_self_train, repeated_target_self_train, self_train_step, step_seed
from .shiftgen import CounterexampleSpec, gen_counterexample
from .wasserstein import AssumptionViolation, class_distances, gradual_shift_gate, rho_conditional

__all__ = [
    "PASS",
    "FAIL",
    "INCONCLUSIVE",
    "SKIPPED",
    "VerificationResult",
    "BoundCheckInstance",
    "random_gradual_pair",
    "verify_baselines_fail",
    "verify_exponential_growth",
    "verify_no_regularization_fixed_point",
    "verify_soft_label_fixed_point",
    "verify_hinge_failure",
    "verify_no_shift_linear_bound",
    "check_theorem_bound",
    "check_corollary_chain",
    "verify_gaussian_recovery",
    "SUITES",
    "run_suite",
    "suite_exit_status",
    "format_table",
]

PASS, FAIL, INCONCLUSIVE, SKIPPED = "pass", "fail", "inconclusive", "skipped"
EPS = 1e-12


def _jsonable(v):
    if isinstance(v, LinearModel):
        return v.to_dict()
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


@dataclass
class VerificationResult:
    """Outcome of one claim check.

    ``passed`` is true exactly when ``status == "pass"``. ``status`` is
    ``inconclusive`` on solver failure and ``skipped`` when an assumption
    of the claim does not hold, so neither can be mistaken for a violation.
    """

    claim: str
    params: dict
    measured: dict
    claimed: dict
    status: str
    tolerance: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "params": _jsonable(self.params),
            "measured": _jsonable(self.measured),
            "claimed": _jsonable(self.claimed),
            "pass": self.passed,
            "status": self.status,
            "tolerance": self.tolerance,
            "diagnostics": _jsonable(self.diagnostics),
        }


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def _exact_cfg(kind: Loss | str, R: float, **kw) -> SelfTrainConfig:
    """Population self-training: no confidence filter, exact global solver."""
    return SelfTrainConfig(loss=Loss(kind), R=R, lam=None, confidence_filter_frac=0.0, solver="exact", **kw)


def _local_cfg(kind: Loss | str, R: float) -> SelfTrainConfig:
    """Warm-started CCCP with a single random restart; only ever advisory."""
    return SelfTrainConfig(loss=Loss(kind), R=R, lam=None, confidence_filter_frac=0.0, solver="local",
                           solver_cfg=SolverConfig(restarts=1))


def _inconclusive(claim, params, claimed, tol, err) -> VerificationResult:
    return VerificationResult(claim, params, {}, claimed, INCONCLUSIVE, tol, {"error": f"{type(err).__name__}: {err}"})


# ---------------------------------------------------------------------------
# counterexample constructions


def verify_baselines_fail(R: float = 1.0, theta0: LinearModel | None = None, sabotage: bool = False) -> VerificationResult:
    """Source-only and direct target self-training both fail on a gradual three-step shift."""
    claim = "baselines_fail"
    params = {"R": R, "sabotage": sabotage}
    ce = gen_counterexample(CounterexampleSpec("baselines_fail", sabotage=sabotage))
    P0, P1, P2 = ce.distributions
    theta0 = ce.theta0 if theta0 is None else theta0
    claimed = {"source_loss": 0.0, "target_loss": 1.0, "st_target_loss": 1.0, "witness_loss": 0.0, "rho": 2 / 3}
    tol = 0.0

    violations = []
    if np.linalg.norm(theta0.w) > R + EPS:
        violations.append(f"initial model has ||w|| = {np.linalg.norm(theta0.w):.6g} > R = {R}")
    rhos = [rho_conditional(P0, P1), rho_conditional(P1, P2)]
    if not max(rhos) * R < 1:
        violations.append(f"rho * R = {max(rhos) * R:.6g} is not below 1")
    if violations:
        return VerificationResult(claim, params, {"rho": rhos}, claimed, SKIPPED, tol,
                                  {"assumption_violation": violations})

    witness = LinearModel([1.0, 0.0], 0.0, R)
    try:
        st = self_train_step(theta0, P2, _exact_cfg("ramp", R))
        gradual, _ = gradual_self_train(theta0, [P1, P2], _exact_cfg("ramp", R))
    except (SolverError, ValueError) as e:
        return _inconclusive(claim, params, claimed, tol, e)
    measured = {
        "source_loss": population_loss("ramp", theta0, P0),
        "target_loss": population_loss("ramp", theta0, P2),
        "st_target_loss": population_loss("ramp", st, P2),
        "witness_loss": max(population_loss("ramp", witness, P) for P in (P0, P1, P2)),
        "rho": rhos,
    }
    ok = (
        measured["source_loss"] == 0.0
        and measured["target_loss"] == 1.0
        and measured["st_target_loss"] == 1.0
        and measured["witness_loss"] == 0.0
        and all(abs(r - 2 / 3) <= 1e-9 for r in rhos)
    )
    diag = {"st_model": st, "gradual_model": gradual, "gradual_target_loss": population_loss("ramp", gradual, P2)}
    return VerificationResult(claim, params, measured, claimed, _verdict(ok), tol, diag)


def verify_exponential_growth(alpha0: float = 0.2, T: int = 2, sabotage: bool = False,
                              advisory: bool = True) -> VerificationResult:
    """Gradual self-training can multiply the loss by 2 every two steps.

    Raises ValueError unless ``0 < alpha0 <= 1/4``. The verdict uses the
    exact solver; a warm-started CCCP run is attached as an advisory.
    """
    spec = CounterexampleSpec("exponential", alpha0=alpha0, T=T, sabotage=sabotage)
    ce = gen_counterexample(spec)
    dists, theta0, R = ce.distributions, ce.theta0, ce.R
    claim = f"exponential_growth[T={T}]"
    params = {"alpha0": alpha0, "T": T, "R": R, "sabotage": sabotage}
    bound = ce.expected["final_loss_lower"]
    claimed = {"final_loss_lower": bound, "rho_max": ce.expected["winf_max"], "witness_loss": 0.0,
               "initial_loss": alpha0}
    tol = EPS

    assumptions = {}
    try:
        gate_ok, rhos = gradual_shift_gate(dists, R, ce.expected["winf_max"])
    except AssumptionViolation as e:
        gate_ok, rhos = False, []
        assumptions["label_marginals"] = str(e)
    assumptions["rho_gate"] = gate_ok
    witness = ce.expected["witness"]
    witness_loss = max(population_loss("ramp", witness, P) for P in dists)
    initial_loss = population_loss("ramp", theta0, dists[0])
    assumptions["witness_separates"] = witness_loss == 0.0
    assumptions["initial_loss_ok"] = initial_loss <= alpha0 + EPS

    try:
        final, trace = gradual_self_train(theta0, dists[1:], _exact_cfg("ramp", R))
    except (SolverError, ValueError) as e:
        return _inconclusive(claim, params, claimed, tol, e)
    losses = [population_loss("ramp", rec.model, P) for rec, P in zip(trace, dists[1:])]
    measured = {"final_loss": losses[-1], "rho": rhos, "witness_loss": witness_loss, "initial_loss": initial_loss}
    diag = {
        "assumptions": assumptions,
        "exact_trajectory": [rec.model for rec in trace],
        "exact_losses": losses,
        "solver": "exact",
    }
    if advisory:
        try:
            local, ltrace = gradual_self_train(theta0, dists[1:], _local_cfg("ramp", R))
            diag["advisory_cccp_losses"] = [population_loss("ramp", rec.model, P) for rec, P in zip(ltrace, dists[1:])]
            diag["advisory_cccp_trajectory"] = [rec.model for rec in ltrace]
        except (SolverError, ValueError) as e:
            diag["advisory_cccp_error"] = str(e)
    ok = all(v is True for v in assumptions.values()) and losses[-1] >= bound - tol
    return VerificationResult(claim, params, measured, claimed, _verdict(ok), tol, diag)


def verify_hinge_failure(alpha: float = 0.3, sabotage: bool = False) -> VerificationResult:
    """With the hinge loss, two gradual steps can flip every prediction."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    ce = gen_counterexample(CounterexampleSpec("hinge_bad", alpha=alpha, sabotage=sabotage))
    dists, theta0, R = ce.distributions, ce.theta0, ce.R
    a0 = ce.expected["alpha0"]
    claim = "hinge_failure"
    params = {"alpha": alpha, "alpha0": a0, "R": R, "sabotage": sabotage}
    claimed = {"initial_hinge": 1.5 * a0, "initial_hinge_max": alpha, "final_error": 1.0, "witness_hinge": 0.0,
               "rho_max": 2 / 3}
    tol = 1e-12
    try:
        gate_ok, rhos = gradual_shift_gate(dists, R, 2 / 3)
    except AssumptionViolation as e:
        gate_ok, rhos = False, [str(e)]
    witness = ce.expected["witness"]
    initial = population_loss("hinge", theta0, dists[0])
    try:
        final, trace = gradual_self_train(theta0, dists[1:], _exact_cfg("hinge", R))
    except (SolverError, ValueError) as e:
        return _inconclusive(claim, params, claimed, tol, e)
    measured = {
        "initial_hinge": initial,
        "final_error": zero_one_error(final, dists[-1]),
        "witness_hinge": max(population_loss("hinge", witness, P) for P in dists),
        "rho": rhos,
    }
    ok = (
        gate_ok
        and abs(initial - 1.5 * a0) <= tol
        and initial <= alpha + tol
        and measured["final_error"] == 1.0
        and measured["witness_hinge"] == 0.0
    )
    diag = {"trajectory": [rec.model for rec in trace], "objectives": [rec.objective for rec in trace]}
    return VerificationResult(claim, params, measured, claimed, _verdict(ok), tol, diag)


def verify_no_shift_linear_bound(alpha0: float = 0.2, T: int = 1, dist: DiscreteDistribution | None = None,
                                 theta0: LinearModel | None = None, eps: float = 0.06, R: float = 1.0,
                                 sabotage: bool = False) -> VerificationResult:
    """Without shift, T self-training rounds cost at most a factor T + 1.

    With ``dist=None`` the two-fold construction is used and the loss after
    the first round is additionally required to reach ``2 alpha0 - eps``.
    Without ``theta0`` the exact ramp minimiser on ``dist`` is used.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    construction = dist is None
    if construction:
        ce = gen_counterexample(CounterexampleSpec("no_shift_doubling", alpha0=alpha0, eps=eps, sabotage=sabotage))
        dist, theta0, R = ce.distributions[0], ce.theta0, ce.R
    claim = f"no_shift_linear_bound[T={T}]"
    params = {"alpha0": alpha0, "T": T, "R": R, "construction": construction, "eps": eps if construction else None,
              "sabotage": sabotage}
    claimed = {"final_loss_upper": alpha0 * (T + 1)}
    if construction and T >= 1:
        claimed["after_one_step_lower"] = 2 * alpha0 - eps
    tol = EPS
    try:
        if theta0 is None:
            theta0 = erm_exact_1d2d("ramp", dist, R)
        models = [theta0]
        if T >= 1:
            _, trace = repeated_target_self_train(theta0, dist, T, _exact_cfg("ramp", R))
            models += [rec.model for rec in trace]
    except (SolverError, ValueError) as e:
        return _inconclusive(claim, params, claimed, tol, e)
    initial = population_loss("ramp", theta0, dist)
    if initial > alpha0 + tol:
        return VerificationResult(claim, params, {"initial_loss": initial}, claimed, INCONCLUSIVE, tol,
                                  {"error": "no initial model with loss <= alpha0"})
    losses = [population_loss("ramp", m, dist) for m in models]
    unlabeled = [unlabeled_loss("ramp", m, dist) for m in models]
    monotone = all(b <= a + tol for a, b in zip(unlabeled[:-1], unlabeled[1:]))
    measured = {"initial_loss": initial, "final_loss": losses[-1], "unlabeled_nonincreasing": monotone}
    ok = monotone and losses[-1] <= alpha0 * (T + 1) + tol
    if "after_one_step_lower" in claimed:
        measured["after_one_step"] = losses[1]
        ok = ok and losses[1] >= claimed["after_one_step_lower"] - tol
    diag = {"losses": losses, "unlabeled_losses": unlabeled, "trajectory": models}
    return VerificationResult(claim, params, measured, claimed, _verdict(ok), tol, diag)


# ---------------------------------------------------------------------------
# fixed points of the unregularised and soft-label variants


def verify_no_regularization_fixed_point(theta: LinearModel | None = None, xs=None,
                                         kind: Loss | str = "ramp") -> VerificationResult:
    """Without a norm budget, scaling the current model up fits its own pseudolabels perfectly.

    Raises ValueError if some point lies on the decision boundary.
    """
    if theta is None:
        theta = LinearModel([1.0, 0.0], 0.0)
    if xs is None:
        xs = [(2.0, 0.0), (-3.0, 0.0)]
    x = np.atleast_2d(np.asarray(xs, float))
    s = theta.scores(x)
    if np.any(s == 0):
        raise ValueError("every point needs a nonzero score; some point lies on the decision boundary")
    alpha = 1.0 / np.min(np.abs(s))
    # round the scale up until every margin is at least 1 in floating point
    while np.min(np.abs(theta.scaled(alpha).scores(x))) < 1.0:
        alpha = np.nextafter(alpha, np.inf)
    scaled = theta.scaled(alpha)
    pseudo = theta.predict(x)
    objective = float(np.mean(loss_fn(kind, pseudo * scaled.scores(x))))

    lo, hi = x.min(axis=0) - 1.0, x.max(axis=0) + 1.0
    if x.shape[1] <= 2:
        axes = [np.linspace(a, b, 41) for a, b in zip(lo, hi)]
        probe = np.stack([g.ravel() for g in np.meshgrid(*axes)], axis=1)
    else:
        probe = np.random.default_rng(0).uniform(lo, hi, size=(2000, x.shape[1]))
    probe = np.vstack([x, probe])
    identical = bool(np.array_equal(theta.predict(probe), scaled.predict(probe)))

    claimed = {"objective": 0.0, "predictions_identical": True}
    measured = {"objective": objective, "predictions_identical": identical, "alpha": float(alpha)}
    ok = objective == 0.0 and identical
    params = {"theta": theta, "n_points": x.shape[0], "kind": Loss(kind).value}
    return VerificationResult("no_regularization_fixed_point", params, measured, claimed, _verdict(ok), 0.0,
                              {"scaled_model": scaled, "n_probe": probe.shape[0]})


def _fd_gradient(f, theta: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def verify_soft_label_fixed_point(theta: LinearModel | None = None, dist: DiscreteDistribution | None = None,
                                  n_probes: int = 500, seed: int = 0) -> VerificationResult:
    """A soft-label student objective is minimised by the teacher itself.

    Finite probing cannot certify a universal claim; the stationarity check
    (finite-difference gradient at the teacher) is the strongest finite
    certificate and the probes are a sanity net around it.
    """
    if n_probes < 100:
        raise ValueError("n_probes must be >= 100")
    rng = np.random.default_rng(seed)
    if theta is None:
        theta = LinearModel(rng.standard_normal(2), float(rng.standard_normal()))
    if dist is None:
        pts = 2.0 * rng.standard_normal((10, theta.dim))
        dist = DiscreteDistribution(pts, np.where(rng.random(10) < 0.5, 1, -1), rng.dirichlet(np.ones(10)))
    d = theta.dim

    def student(p):
        return soft_label_loss(theta, LinearModel(p[:d], p[d]), dist)

    p0 = theta.params()
    base = student(p0)
    h = 1e-6
    grad = _fd_gradient(student, p0, h)
    gnorm = float(np.linalg.norm(grad))

    values = [base]  # the teacher itself is the first probe
    for _ in range(n_probes - 1):
        u = rng.standard_normal(d + 1)
        u *= 10 ** rng.uniform(-3, 0.5) / np.linalg.norm(u)
        values.append(student(p0 + u))
    values = np.array(values)
    gaps = values - base
    all_ge = bool(np.all(gaps >= -EPS))
    claimed = {"gradient_norm_max": 1e-6, "all_probes_ge": True}
    measured = {"gradient_norm": gnorm, "all_probes_ge": all_ge, "min_gap": float(gaps.min()),
                "teacher_objective": base}
    ok = gnorm <= 1e-6 and all_ge
    params = {"theta": theta, "n_atoms": len(dist), "n_probes": n_probes, "seed": seed, "fd_step": h}
    diag = {"certificate": "finite-difference stationarity plus random probes; not a proof over all students"}
    return VerificationResult("soft_label_fixed_point", params, measured, claimed, _verdict(ok), 1e-6, diag)


# ---------------------------------------------------------------------------
# the one-step bound and its chained form


@dataclass(frozen=True)
class BoundCheckInstance:
    """Hypotheses of the one-step bound: P, Q, a model, and the constants entering the bound."""

    P: DiscreteDistribution
    Q: DiscreteDistribution
    theta: LinearModel
    R: float
    rho: float
    alpha_star: float
    B: float
    n: int = 1000
    delta: float = 0.1

    def __post_init__(self):
        if not self.rho * self.R < 1:
            raise AssumptionViolation(f"need rho < 1/R, got rho = {self.rho}, R = {self.R}")
        for y in (1, -1):
            if abs(self.P.class_mass(y) - self.Q.class_mass(y)) > 1e-12:
                raise AssumptionViolation("P and Q have different label marginals")
        m2 = max(second_moment_bound(self.P), second_moment_bound(self.Q))
        if m2 > self.B**2 * (1 + 1e-12):
            raise AssumptionViolation(f"second moment {m2} exceeds B^2 = {self.B ** 2}")
        if np.linalg.norm(self.theta.w) > self.R + 1e-12:
            raise AssumptionViolation("theta lies outside the norm ball")
        if self.n < 1 or not 0 < self.delta < 1:
            raise ValueError("need n >= 1 and 0 < delta < 1")

    @classmethod
    def build(cls, P, Q, theta, R, n=1000, delta=0.1) -> "BoundCheckInstance":
        """Fill in rho, alpha_star and B from the distributions (exact solver for alpha_star)."""
        rho = rho_conditional(P, Q)
        a_star = population_loss("ramp", erm_exact_1d2d("ramp", Q, R), Q)
        B = math.sqrt(max(second_moment_bound(P), second_moment_bound(Q)))
        return cls(P, Q, theta, R, rho, a_star, B, n, delta)


def _sample_term(B: float, R: float, n: int, delta: float) -> float:
    return (4 * B * R + math.sqrt(2 * math.log(2 / delta))) / math.sqrt(n)


def _random_class_cloud(rng, k, center, spread):
    return center + spread * rng.standard_normal((k, center.shape[0]))


def _shift_atoms(x, rho, rng):
    """Move every atom by a displacement of norm at most rho (common drift plus jitter)."""
    drift = rng.standard_normal(x.shape[1])
    v = drift / np.linalg.norm(drift) + 0.5 * rng.standard_normal(x.shape)
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return x + rho * rng.uniform(0.3, 1.0, (x.shape[0], 1)) * v / np.maximum(norms, 1e-12)


def random_gradual_pair(rng: np.random.Generator, rho_max: float = 0.5, d: int = 2, steps: int = 1):
    """Random small 2-class discrete law and ``steps`` successive shifts of size <= rho_max.

    Class masses are 1/2 each throughout; every atom keeps its label and mass.
    Returns the list of distributions (length steps + 1).
    """
    k = int(rng.integers(3, 9))
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    sep = rng.uniform(0.3, 2.0)
    spread = rng.uniform(0.1, 1.0)
    xp = _random_class_cloud(rng, k, sep * u, spread)
    xn = _random_class_cloud(rng, k, -sep * u, spread)
    # small integer weights keep the masses exactly rational for the transport solver
    wp, wn = rng.integers(1, 10, k), rng.integers(1, 10, k)
    mp, mn = 0.5 * wp / wp.sum(), 0.5 * wn / wn.sum()
    labels = np.r_[np.ones(k, int), -np.ones(k, int)]
    masses = np.r_[mp, mn]
    x = np.vstack([xp, xn])
    out = [DiscreteDistribution(x, labels, masses)]
    for _ in range(steps):
        x = _shift_atoms(x, rng.uniform(0.0, rho_max), rng)
        out.append(DiscreteDistribution(x, labels, masses))
    return out


def _random_start(P: DiscreteDistribution, R: float, rng) -> LinearModel:
    """Exact ramp minimiser on P, perturbed half of the time so that the starting loss varies."""
    theta = erm_exact_1d2d("ramp", P, R)
    if rng.random() < 0.5:
        p = theta.params() + 0.5 * rng.standard_normal(theta.dim + 1)
        theta = LinearModel(project_ball(p[:-1], R), p[-1], R)
    return theta


def _sample_points(Q: DiscreteDistribution, n: int, rng) -> np.ndarray:
    idx = rng.choice(len(Q), size=n, p=Q.masses)
    return Q.points[idx]


def check_theorem_bound(inst: BoundCheckInstance | None = None, trials: int = 100, seed: int = 0,
                        n: int = 1000, delta: float = 0.1, R: float = 1.0, rho_max: float = 0.5) -> VerificationResult:
    """One-step bound for self-training on n samples from a shifted law.

    With ``inst`` the same instance is resampled ``trials`` times; otherwise
    every trial draws a fresh random 2-D pair. Also checks the single-factor
    error lemma and the pseudolabel-disagreement lemma on every trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    cfg = _exact_cfg("ramp", R if inst is None else inst.R)
    slacks, lemma1, lemma2, disagree, inconclusive = [], 0, 0, 0, 0
    worst = None
    for trial in range(trials):
        try:
            if inst is None:
                P, Q = random_gradual_pair(rng, rho_max)
                case = BoundCheckInstance.build(P, Q, _random_start(P, R, rng), R, n, delta)
            else:
                case = inst
            xs = _sample_points(case.Q, case.n, rng)
            new = self_train_step(case.theta, xs, cfg)
        except (SolverError, ValueError) as e:
            if isinstance(e, AssumptionViolation):
                raise
            inconclusive += 1
            continue
        lp = population_loss("ramp", case.theta, case.P)
        lhs = population_loss("ramp", new, case.Q)
        rhs = 2 / (1 - case.rho * case.R) * lp + case.alpha_star + _sample_term(case.B, case.R, case.n, case.delta)
        slacks.append(rhs - lhs)
        if worst is None or rhs - lhs < worst["slack"]:
            worst = {"trial": trial, "slack": rhs - lhs, "lhs": lhs, "rhs": rhs, "rho": case.rho}
        err_q = zero_one_error(case.theta, case.Q)
        lemma1 += err_q <= lp / (1 - case.rho * case.R) + EPS
        lemma2 += err_q <= 2 * lp / (1 - case.rho * case.R) + EPS
        # pseudolabels from a random model versus true labels
        other = LinearModel(rng.standard_normal(case.Q.dim), float(rng.standard_normal()))
        y_alt = other.predict(case.Q.points)
        beta = float(np.dot(case.Q.masses, y_alt != case.Q.labels))
        probe = LinearModel(project_ball(rng.standard_normal(case.Q.dim), case.R), float(rng.standard_normal()))
        gap = abs(population_loss("ramp", probe, case.Q.relabel(y_alt)) - population_loss("ramp", probe, case.Q))
        disagree += gap <= beta + EPS
    done = len(slacks)
    slacks = np.array(slacks)
    params = {"trials": trials, "seed": seed, "n": n if inst is None else inst.n,
              "delta": delta if inst is None else inst.delta, "R": R if inst is None else inst.R,
              "rho_max": rho_max, "random_instances": inst is None}
    claimed = {"bound_holds": trials, "error_lemma_factor1_holds": trials, "disagreement_lemma_holds": trials}
    measured = {"bound_holds": int(np.sum(slacks >= -EPS)), "error_lemma_factor1_holds": int(lemma1),
                "error_lemma_factor2_holds": int(lemma2), "disagreement_lemma_holds": int(disagree),
                "inconclusive_trials": inconclusive}
    diag = {"slack_min": float(slacks.min()) if done else None,
            "slack_quantiles": np.quantile(slacks, [0.0, 0.1, 0.5, 0.9, 1.0]).tolist() if done else None,
            "worst": worst}
    if inconclusive > 0.1 * trials:
        status = INCONCLUSIVE
    else:
        status = _verdict(done == measured["bound_holds"] == lemma1 == disagree)
    return VerificationResult("theorem_bound", params, measured, claimed, status, EPS, diag)


def check_corollary_chain(T: int = 3, trials: int = 20, seed: int = 0, n: int = 1000, delta: float = 0.1,
                          R: float = 1.0, rho_max: float = 0.5) -> VerificationResult:
    """Chained bound after T gradual steps on random 2-D sequences.

    The starting level is ``max(L(theta0, P0), max_t alpha*_t)`` so that the
    requirement that it dominates every domain's best loss holds by design.
    """
    rng = np.random.default_rng(seed)
    cfg = _exact_cfg("ramp", R)
    holds, done, inconclusive, slacks = 0, 0, 0, []
    for _ in range(trials):
        dists = random_gradual_pair(rng, rho_max, steps=T)
        try:
            theta0 = _random_start(dists[0], R, rng)
            a_star = max(population_loss("ramp", erm_exact_1d2d("ramp", P, R), P) for P in dists)
            samples = [_sample_points(P, n, rng) for P in dists[1:]]
            final, _ = gradual_self_train(theta0, samples, cfg)
        except (SolverError, ValueError):
            inconclusive += 1
            continue
        rho = max(rho_conditional(a, b) for a, b in zip(dists[:-1], dists[1:]))
        B = math.sqrt(max(second_moment_bound(P) for P in dists))
        a0 = max(population_loss("ramp", theta0, dists[0]), a_star)
        beta = 2 / (1 - rho * R)
        term = (4 * B * R + math.sqrt(2 * math.log(2 * T / delta))) / math.sqrt(n)
        rhs = beta ** (T + 1) * (a0 + term)
        lhs = population_loss("ramp", final, dists[-1])
        slacks.append(rhs - lhs)
        done += 1
        holds += lhs <= rhs + EPS
    params = {"T": T, "trials": trials, "seed": seed, "n": n, "delta": delta, "R": R, "rho_max": rho_max}
    status = INCONCLUSIVE if inconclusive > 0.1 * trials else _verdict(holds == done)
    return VerificationResult(f"corollary_chain[T={T}]", params, {"holds": holds, "inconclusive_trials": inconclusive},
                              {"holds": trials}, status, EPS,
                              {"slack_min": min(slacks) if slacks else None})


# ---------------------------------------------------------------------------
# Gaussian setting


def _default_shifts(d: int, B: float, count: int = 5, norm: float = 0.5) -> list[np.ndarray]:
    """Shifts of equal norm that rotate the mean along the circle of radius B."""
    if d == 1:
        return [np.array([norm])] * count
    angle = 2 * math.asin(norm / (2 * B))
    out, mu = [], np.zeros(d)
    mu[0] = B
    for t in range(1, count + 1):
        nxt = np.zeros(d)
        nxt[0], nxt[1] = B * math.cos(t * angle), B * math.sin(t * angle)
        out.append(nxt - mu)
        mu = nxt
    return out


def _lipschitz_pairs(rng, d: int, B: float, count: int) -> tuple[int, float]:
    """Count pairs with ||w*(m) - w*(m')|| <= ||m - m'|| / B for random means of norm >= B."""
    ok, worst = 0, -np.inf
    for _ in range(count):
        a, b = rng.standard_normal((2, d))
        a *= rng.uniform(B, 3 * B) / np.linalg.norm(a)
        b = a + rng.uniform(0, B) * b / np.linalg.norm(b)
        if np.linalg.norm(b) < B:
            b *= B / np.linalg.norm(b)
        lhs = np.linalg.norm(w_star(a) - w_star(b))
        rhs = np.linalg.norm(a - b) / B
        worst = max(worst, lhs - rhs)
        ok += lhs <= rhs + EPS
    return ok, float(worst)


def verify_gaussian_recovery(d: int = 2, B_sep: float = 2.0, shifts=None, sigma: float = 0.4,
                             mc_samples: int = 200_000, seed: int = 0, tolerance: float = 0.05,
                             phi: Loss | str = "ramp", lipschitz_pairs: int = 1000,
                             max_iters: int = 300, restarts: int = 2) -> VerificationResult:
    """Trust-region minimisation of the unlabeled objective tracks the Bayes direction.

    ``shifts`` lists the mean increments; each must have norm <= B_sep / 4
    and every mean must keep norm >= B_sep, else ValueError. The default is
    five increments of norm 1/2 turning the mean around the circle of radius
    B_sep (pass zero vectors for the no-shift case).
    """
    shifts = _default_shifts(d, B_sep) if shifts is None else [np.asarray(s, float).reshape(d) for s in shifts]
    mu = np.zeros(d)
    mu[0] = B_sep
    means = [mu]
    for s in shifts:
        if np.linalg.norm(s) > B_sep / 4 + EPS:
            raise ValueError(f"shift of norm {np.linalg.norm(s):.6g} exceeds B/4 = {B_sep / 4}")
        means.append(means[-1] + s)
    if any(np.linalg.norm(m) < B_sep - EPS for m in means):
        raise ValueError("every mean must have norm at least B_sep")

    rng = np.random.default_rng(seed)
    step_lip = [float(np.linalg.norm(w_star(b) - w_star(a)) - np.linalg.norm(b - a) / B_sep)
                for a, b in zip(means[:-1], means[1:])]
    pair_ok, pair_worst = _lipschitz_pairs(rng, d, B_sep, lipschitz_pairs)
    lipschitz_ok = all(v <= EPS for v in step_lip) and pair_ok == lipschitz_pairs

    u = rng.standard_normal(d)
    w = project_ball(w_star(means[0]) + 0.2 * u / np.linalg.norm(u), 1.0)
    deviations = [float(np.linalg.norm(w - w_star(means[0])))]
    for t, m in enumerate(means[1:], start=1):
        cfg = SolverConfig(max_iters=max_iters, restarts=restarts, seed=step_seed(seed, t))
        domain = GaussianMixtureDomain.isotropic(m, sigma)
        w = minimize_unlabeled_gaussian(phi, domain, 1.0, TrustRegion(w, 0.5), mc_samples, cfg)
        deviations.append(float(np.linalg.norm(w - w_star(m))))
    final_dev = deviations[-1]
    params = {"d": d, "B_sep": B_sep, "shifts": shifts, "sigma": sigma, "mc_samples": mc_samples, "seed": seed,
              "phi": Loss(phi).value, "trust_radius": 0.5, "initial_offset": 0.2}
    measured = {"final_deviation": final_dev, "lipschitz_pairs_ok": int(pair_ok), "lipschitz_steps_ok": all(
        v <= EPS for v in step_lip)}
    claimed = {"final_deviation_max": tolerance, "lipschitz_pairs_ok": lipschitz_pairs}
    diag = {"deviations": deviations, "final_w": w, "target_w": w_star(means[-1]), "lipschitz_worst_gap": pair_worst}
    ok = lipschitz_ok and final_dev <= tolerance
    return VerificationResult("gaussian_recovery", params, measured, claimed, _verdict(ok), tolerance, diag)


# ---------------------------------------------------------------------------
# suite


_MARGIN = {
    "baselines_fail": lambda sab: verify_baselines_fail(sabotage=sab),
    "exponential_growth[T=1]": lambda sab: verify_exponential_growth(0.2, 1, sabotage=sab),
    "exponential_growth[T=2]": lambda sab: verify_exponential_growth(0.2, 2, sabotage=sab),
    "exponential_growth[T=3]": lambda sab: verify_exponential_growth(0.2, 3, sabotage=sab),
    "hinge_failure": lambda sab: verify_hinge_failure(0.3, sabotage=sab),
    "no_regularization_fixed_point": lambda sab: verify_no_regularization_fixed_point(),
    "soft_label_fixed_point": lambda sab: verify_soft_label_fixed_point(),
    **{f"no_shift_linear_bound[T={T}]": (lambda sab, T=T: verify_no_shift_linear_bound(0.2, T, sabotage=sab))
       for T in range(6)},
    "theorem_bound": lambda sab: check_theorem_bound(),
    "corollary_chain[T=3]": lambda sab: check_corollary_chain(3),
}
_GAUSSIAN = {"gaussian_recovery": lambda sab: verify_gaussian_recovery()}
_SABOTAGEABLE = {k for k in _MARGIN if k.startswith(("baselines", "exponential", "hinge", "no_shift"))}
SUITES = {"margin": list(_MARGIN), "gaussian": list(_GAUSSIAN), "all": list(_MARGIN) + list(_GAUSSIAN)}


def _run_claim(name: str, sabotage: bool) -> VerificationResult:
    fn = _MARGIN.get(name) or _GAUSSIAN[name]
    return fn(sabotage)


def run_suite(which: str = "all", sabotage=(), workers: int | None = 1, only=None) -> list[VerificationResult]:
    """Run a fixed battery of checks with their default parameters.

    ``sabotage`` names claims whose construction gets corrupted (test mode).
    ``workers`` > 1 runs claims in separate processes; results are always
    ordered by claim id. ``only`` restricts to a subset of the suite.
    """
    if which not in SUITES:
        raise ValueError(f"unknown suite {which!r}; choose from {sorted(SUITES)}")
    names = SUITES[which] if only is None else [n for n in SUITES[which] if n in set(only)]
    bad = set(sabotage) - _SABOTAGEABLE
    if bad:
        raise ValueError(f"claims without a sabotageable construction: {sorted(bad)}")
    flags = [n in set(sabotage) for n in names]
    if workers is None:
        workers = int(os.environ.get("GDA_THREADS", os.cpu_count() or 1))
    if workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_claim, names, flags))
    else:
        results = [_run_claim(n, f) for n, f in zip(names, flags)]
    return sorted(results, key=lambda r: r.claim)


def suite_exit_status(results) -> int:
    """0 if all pass, 1 on any failure, else 2 if something was inconclusive or skipped."""
    statuses = {r.status for r in results}
    if FAIL in statuses:
        return 1
    if statuses - {PASS}:
        return 2
    return 0


def format_table(results) -> str:
    rows = [("claim", "status", "measured")]
    for r in results:
        shown = ", ".join(f"{k}={_short(v)}" for k, v in r.measured.items())
        rows.append((r.claim, r.status.upper(), shown))
    width = [max(len(row[i]) for row in rows) for i in range(2)]
    return "\n".join(f"{a:<{width[0]}}  {b:<{width[1]}}  {c}" for a, b, c in rows)


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)
