import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradual_st.distributions import DiscreteDistribution, GaussianMixtureDomain, sample_domain
from gradual_st.models import LinearModel, loss_fn, zero_one_error
from gradual_st.optimize import (
    SolverConfig,
    TrustRegion,
    UnsupportedDimensionError,
    erm_constrained,
    erm_exact_1d2d,
    erm_objective,
    mc_unlabeled_objective,
    minimize_unlabeled_gaussian,
    penalized_logistic,
    project_ball,
    project_intersection,
    w_star,
)
from gradual_st.shiftgen import CounterexampleSpec, gen_counterexample

THETA0 = LinearModel([0.0, 1.0], 0.0, 1.0)
P2 = DiscreteDistribution([[1.0, -1 / 3], [-1.0, 1 / 3]], [1, -1])


def _pseudolabeled(model, dist):
    return dist.relabel(model.predict(dist.points))


def _random_instance(seed, n_max=8):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    x = rng.normal(size=(n, 2)) * rng.uniform(0.3, 3)
    y = rng.choice([-1, 1], n)
    m = rng.random(n) + 0.1
    return DiscreteDistribution(x, y, m / m.sum())


def test_solver_config_validation():
    for bad in ({"max_iters": 0}, {"tolerance": 0}, {"restarts": 0}, {"step_decay": "exp"}, {"method": "newton"}):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    with pytest.raises(ValueError):
        TrustRegion(np.zeros(2), 0.0)


def test_hinge_fits_flipped_pseudolabels():
    data = _pseudolabeled(THETA0, P2)
    model = erm_constrained("hinge", data, 1.0, warm_start=THETA0)
    assert erm_objective("hinge", model, data) <= 1e-6
    assert np.array_equal(model.predict(data.points), data.labels)
    assert np.linalg.norm(model.w) <= 1.0 + 1e-9


@pytest.mark.parametrize("kind", ["ramp", "hinge"])
def test_single_atom_zero_loss(kind):
    data = DiscreteDistribution([[1.0]], [1])
    for solve in (lambda: erm_constrained(kind, data, 1.0), lambda: erm_exact_1d2d(kind, data, 1.0)):
        model = solve()
        assert erm_objective(kind, model, data) <= 1e-9
        assert data.labels[0] * model.scores(data.points)[0] >= 1 - 1e-9


def _grid_oracle(kind, data, R, w_res=2001, b_lim=12.0):
    """Brute-force minimum over (w, b) in [-R, R] x [-b_lim, b_lim] for 1-D data."""
    ws = np.linspace(-R, R, w_res)
    bs = np.linspace(-b_lim, b_lim, w_res)
    best = np.inf
    for w in ws:
        m = data.labels[None, :] * (w * data.points[:, 0][None, :] + bs[:, None])
        best = min(best, float(np.min(loss_fn(kind, m) @ data.masses)))
    return best


def test_cccp_matches_grid_oracle_on_no_shift_construction():
    ce = gen_counterexample(CounterexampleSpec("no_shift_doubling", alpha0=0.2, eps=0.06))
    data = ce.distributions[0]
    oracle = _grid_oracle("ramp", data, 1.0)
    cccp = erm_constrained("ramp", data, 1.0, warm_start=ce.theta0)
    exact = erm_exact_1d2d("ramp", data, 1.0)
    assert erm_objective("ramp", cccp, data) <= oracle + 1e-3
    # exact vertex enumeration can only improve on the grid
    assert erm_objective("ramp", exact, data) <= oracle + 1e-12


def test_exact_solver_examples():
    ce = gen_counterexample(CounterexampleSpec("exponential", alpha0=0.2, T=1))
    model = erm_exact_1d2d("ramp", ce.distributions[0], 1.0)
    assert erm_objective("ramp", model, ce.distributions[0]) <= 0.2 + 1e-12
    hb = gen_counterexample(CounterexampleSpec("hinge_bad", alpha=0.3))
    pl = _pseudolabeled(hb.theta0, hb.distributions[1])
    model = erm_exact_1d2d("hinge", pl, 1.0, warm_start=hb.theta0)
    assert erm_objective("hinge", model, pl) == pytest.approx(erm_objective("hinge", hb.theta0, pl), abs=1e-9)
    with pytest.raises(UnsupportedDimensionError):
        erm_exact_1d2d("ramp", DiscreteDistribution(np.ones((1, 3)), [1]), 1.0)


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_convex_path_matches_exact_oracle(seed):
    data = _random_instance(seed)
    for kind in ("hinge", "logistic"):
        fast = erm_objective(kind, erm_constrained(kind, data, 1.0), data)
        exact = erm_objective(kind, erm_exact_1d2d(kind, data, 1.0), data)
        assert fast <= exact + 1e-4


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_exact_ramp_never_worse_than_cccp_or_warm_start(seed):
    data = _random_instance(seed)
    rng = np.random.default_rng(seed + 1)
    warm = LinearModel(project_ball(rng.normal(size=2), 1.0), rng.normal(), 1.0)
    exact = erm_objective("ramp", erm_exact_1d2d("ramp", data, 1.0, warm_start=warm), data)
    cccp = erm_objective("ramp", erm_constrained("ramp", data, 1.0, warm_start=warm), data)
    assert exact <= cccp + 1e-9
    assert cccp <= erm_objective("ramp", warm, data) + 1e-12


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_cccp_rounds_are_monotone(seed):
    data = _random_instance(seed)
    trace = []
    erm_constrained("ramp", data, 1.0, SolverConfig(restarts=1), trace=trace)
    assert len(trace) >= 1
    assert all(b <= a + 1e-12 for a, b in zip(trace[:-1], trace[1:]))


def test_subgradient_method_reaches_low_hinge_objective():
    data = _pseudolabeled(THETA0, P2)
    cfg = SolverConfig(method="subgradient", max_iters=2000)
    model = erm_constrained("hinge", data, 1.0, cfg)
    assert erm_objective("hinge", model, data) <= 0.05


@given(arrays(float, 3, elements=st.floats(-50, 50, allow_nan=False)), st.floats(0.1, 5))
def test_ball_projection(w, R):
    p = project_ball(w, R)
    assert np.linalg.norm(p) <= R * (1 + 1e-9)
    if np.linalg.norm(w) <= R:
        assert np.array_equal(p, w)


@given(arrays(float, 2, elements=st.floats(-5, 5, allow_nan=False)),
       arrays(float, 2, elements=st.floats(-1, 1, allow_nan=False)))
def test_intersection_projection(w, c):
    c = project_ball(c, 1.0)
    p = project_intersection(w, 1.0, c, 0.5)
    assert np.linalg.norm(p) <= 1 + 1e-9
    assert np.linalg.norm(p - c) <= 0.5 * (1 + 1e-9)


def test_penalized_logistic_examples():
    x = np.array([[1.0], [-1.0]])
    y = np.array([1, -1])
    model = penalized_logistic(x, y, 0.0, 50, seed=0)
    assert zero_one_error(model, DiscreteDistribution(x, y)) == 0.0
    shrunk = penalized_logistic(x, y, 1e6, 50, seed=0)
    assert np.linalg.norm(shrunk.w) <= 1e-2
    a = penalized_logistic(x, y, 0.02, 5, seed=3)
    b = penalized_logistic(x, y, 0.02, 5, seed=3)
    assert np.array_equal(a.params(), b.params())
    for bad in ((-1.0, 5), (0.1, 0)):
        with pytest.raises(ValueError):
            penalized_logistic(x, y, *bad)


def test_penalized_logistic_on_high_dimensional_source():
    rng = np.random.default_rng(0)
    mu = rng.standard_normal((2, 100))
    dom = GaussianMixtureDomain(mu[0], mu[1], 0.075 * np.eye(100), 0.075 * np.eye(100))
    train, test = sample_domain(dom, 500, 1), sample_domain(dom, 2000, 2)
    model = penalized_logistic(train.x, train.y, 0.02, 100, seed=0)
    assert np.mean(model.predict(test.x) == test.y) >= 0.95


def test_w_star():
    assert np.allclose(w_star([3.0, 4.0]), [0.6, 0.8])
    u = np.array([0.0, 1.0])
    assert np.array_equal(w_star(u), u)
    with pytest.raises(ValueError):
        w_star([0.0, 0.0])


def test_w_star_lipschitz_on_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = rng.standard_normal((2, 3))
        a *= rng.uniform(1, 4) / np.linalg.norm(a)
        b *= rng.uniform(1, 4) / np.linalg.norm(b)
        assert np.linalg.norm(w_star(a) - w_star(b)) <= np.linalg.norm(a - b) + 1e-12


def test_unlabeled_minimiser_recovers_mean_direction():
    mu = np.array([2.0, 0.0, 0.0])
    dom = GaussianMixtureDomain.isotropic(mu, 0.5)
    cfg = SolverConfig(max_iters=300, restarts=2, seed=0)
    w = minimize_unlabeled_gaussian("ramp", dom, 1.0, TrustRegion(w_star(mu), 0.5), 200_000, cfg)
    assert np.linalg.norm(w - w_star(mu)) <= 0.05
    again = minimize_unlabeled_gaussian("ramp", dom, 1.0, TrustRegion(w_star(mu), 0.5), 200_000, cfg)
    assert np.array_equal(w, again)


def test_unlabeled_minimiser_degenerate_variance():
    dom = GaussianMixtureDomain.isotropic([1.0, 0.0], 1e-6)
    cfg = SolverConfig(max_iters=200, restarts=1)
    w = minimize_unlabeled_gaussian("ramp", dom, 1.0, TrustRegion(np.array([1.0, 0.0]), 0.5), 2000, cfg)
    assert np.linalg.norm(w - [1.0, 0.0]) <= 1e-3


def test_unlabeled_minimiser_argument_errors():
    dom = GaussianMixtureDomain.isotropic([1.0, 0.0], 0.5)
    with pytest.raises(ValueError):
        minimize_unlabeled_gaussian("ramp", dom, 1.0, TrustRegion(np.zeros(2), 0.5), 10)
    with pytest.raises(ValueError):
        minimize_unlabeled_gaussian("ramp", dom, 0.1, TrustRegion(np.array([1.0, 0.0]), 0.5), 1000)


def test_monte_carlo_stability():
    mu = np.array([2.0, 0.0])
    dom = GaussianMixtureDomain.isotropic(mu, 0.4)
    cfg = SolverConfig(max_iters=200, restarts=1, seed=5)
    trust = TrustRegion(np.array([0.8, 0.4]), 0.5)
    ref = dom.sample(400_000, np.random.default_rng(99)).x
    vals, ses = [], []
    for n in (50_000, 100_000):
        w = minimize_unlabeled_gaussian("ramp", dom, 1.0, trust, n, cfg)
        r = loss_fn("ramp", np.abs(ref @ w))
        vals.append(mc_unlabeled_objective("ramp", w, ref))
        ses.append(r.std() / np.sqrt(n))
    assert abs(vals[0] - vals[1]) <= 3 * max(ses)
