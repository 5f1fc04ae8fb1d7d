import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradual_st.distributions import GaussianMixtureDomain
from gradual_st.models import population_loss
from gradual_st.shiftgen import (
    CounterexampleSpec,
    GaussianDriftSpec,
    exponential_steps,
    gen_counterexample,
    gen_gaussian_drift,
    gen_mixing_interpolation,
    gen_rotation_drift,
    haar_rotation,
    random_covariance,
)
from gradual_st.wasserstein import rho_conditional, winf_discrete


@given(st.integers(1, 12), st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_haar_rotation_is_orthogonal(d, seed):
    q = haar_rotation(d, np.random.default_rng(seed))
    assert np.max(np.abs(q.T @ q - np.eye(d))) <= 1e-10
    assert abs(abs(np.linalg.det(q)) - 1) <= 1e-10


def test_haar_rotation_has_no_preferred_sign():
    rng = np.random.default_rng(0)
    first = np.array([haar_rotation(3, rng)[0, 0] for _ in range(4000)])
    # the (0, 0) entry of a Haar matrix is symmetric about zero
    assert abs(first.mean()) < 0.03


def test_random_covariance_spectrum():
    cov = random_covariance(6, 0.05, 0.1, np.random.default_rng(2))
    eig = np.linalg.eigvalsh(cov)
    assert np.all(eig >= 0.05 - 1e-12) and np.all(eig <= 0.1 + 1e-12)


def test_gaussian_drift_shapes_and_determinism():
    spec = GaussianDriftSpec(d=5, n_labeled=20, n_unlabeled=40, n_target_eval=10, seed=4)
    a, b = gen_gaussian_drift(spec), gen_gaussian_drift(spec)
    assert a.source.x.shape == (20, 5) and a.flat_intermediate().shape == (40, 5)
    assert a.target_unlabeled.shape == (40, 5) and a.target_eval.x.shape == (10, 5)
    assert np.array_equal(a.flat_intermediate(), b.flat_intermediate())
    assert not np.array_equal(a.flat_intermediate(), gen_gaussian_drift(GaussianDriftSpec(d=5, n_unlabeled=40, seed=5)).flat_intermediate())


def test_gaussian_drift_stream_ends_at_target():
    # with tiny variances the last stream points sit at the target means
    spec = GaussianDriftSpec(d=3, n_labeled=10, n_unlabeled=2000, min_var=1e-8, max_var=1e-8, seed=1)
    seq = gen_gaussian_drift(spec)
    tail = seq.flat_intermediate()[-50:]
    tgt = seq.target_unlabeled
    # each tail point lies close to one of the two target class means
    means = np.unique(np.round(tgt, 2), axis=0)
    dist = np.min(np.linalg.norm(tail[:, None, :] - means[None], axis=2), axis=1)
    assert np.max(dist) < 0.1


def test_gaussian_drift_validation():
    for bad in ({"d": 0}, {"min_var": 0.2, "max_var": 0.1}, {"n_labeled": 0}):
        with pytest.raises(ValueError):
            GaussianDriftSpec(**bad)


def test_mixing_endpoints():
    src = GaussianMixtureDomain.isotropic([5.0, 0.0], 1e-6)
    tgt = GaussianMixtureDomain.isotropic([0.0, 5.0], 1e-6)
    seq = gen_mixing_interpolation(src, tgt, 4, 200, seed=0)
    last = seq.intermediate[-1]
    # the last domain is all target, so no point sits near the source means
    assert np.all(np.abs(last[:, 0]) < 1e-2)
    first = seq.intermediate[0]
    frac_tgt = np.mean(np.abs(first[:, 0]) < 1e-2)
    assert 0.1 < frac_tgt < 0.4
    with pytest.raises(ValueError):
        gen_mixing_interpolation(src, tgt, 0, 10, 0)


def test_rotation_steps_respect_the_chord_bound():
    seq = gen_rotation_drift(40, 10, 90.0, seed=3)
    bound = seq.metadata["step_winf_bound"]
    m = np.full(40, 1 / 40)
    prev = seq.source.x
    for cur in seq.intermediate:
        assert winf_discrete((prev, m), (cur, m)) <= bound + 1e-9
        prev = cur
    assert np.allclose(seq.target_unlabeled, seq.intermediate[-1])
    with pytest.raises(ValueError):
        gen_rotation_drift(10, 2, 180.0)


def test_exponential_step_count():
    S, w, delta = exponential_steps(0.2)
    assert S == 1 and delta == pytest.approx(0.1)
    assert sum(w) + 0.2 == pytest.approx(0.5)
    for a0 in (0.01, 0.05, 0.1, 0.2, 0.25):
        S, w, _ = exponential_steps(a0)
        assert (2 ** (S - 1) + 0.5) * a0 < 0.5 <= (2**S + 0.5) * a0
        assert all(v >= 0 for v in w)


@pytest.mark.parametrize("a0,T", [(0.2, 1), (0.2, 3), (0.05, 4)])
def test_exponential_construction_invariants(a0, T):
    ce = gen_counterexample(CounterexampleSpec("exponential", alpha0=a0, T=T))
    assert len(ce.distributions) == 2 * T + 1
    for P, Q in zip(ce.distributions[:-1], ce.distributions[1:]):
        assert abs(P.masses.sum() - 1) <= 1e-12
        assert abs(P.masses[P.labels > 0].sum() - 0.5) <= 1e-12
        assert rho_conditional(P, Q) <= 0.6 + 1e-12
    assert population_loss("ramp", ce.theta0, ce.distributions[0]) == pytest.approx(a0, abs=1e-12)


def test_hinge_bad_and_no_shift_constructions():
    hb = gen_counterexample(CounterexampleSpec("hinge_bad", alpha=0.3))
    assert hb.expected["alpha0"] == pytest.approx(0.2)
    P0, P1, P2 = hb.distributions
    assert rho_conditional(P0, P1) <= 2 / 3 + 1e-12 and rho_conditional(P1, P2) <= 2 / 3 + 1e-12
    assert population_loss("hinge", hb.theta0, P0) == pytest.approx(0.3, abs=1e-12)
    ns = gen_counterexample(CounterexampleSpec("no_shift_doubling", alpha0=0.2, eps=0.06))
    assert population_loss("ramp", ns.theta0, ns.distributions[0]) == pytest.approx(ns.expected["initial_loss"], abs=1e-12)


def test_counterexample_validation():
    for bad in (
        {"kind": "exponential", "alpha0": 0.3, "T": 1},
        {"kind": "exponential", "alpha0": 0.2, "T": 0},
        {"kind": "hinge_bad", "alpha": 0.0},
        {"kind": "no_shift_doubling", "alpha0": 0.2, "eps": 0.3},
        {"kind": "spiral"},
    ):
        with pytest.raises(ValueError):
            CounterexampleSpec(**bad)


def test_sabotage_changes_the_construction():
    for spec in (
        CounterexampleSpec("baselines_fail", sabotage=True),
        CounterexampleSpec("exponential", alpha0=0.2, T=1, sabotage=True),
        CounterexampleSpec("hinge_bad", alpha=0.3, sabotage=True),
        CounterexampleSpec("no_shift_doubling", alpha0=0.2, eps=0.06, sabotage=True),
    ):
        honest = gen_counterexample(CounterexampleSpec(spec.kind, spec.alpha0, spec.T, spec.alpha, spec.eps))
        bad = gen_counterexample(spec)
        a, b = honest.distributions[-1], bad.distributions[-1]
        same = a.points.shape == b.points.shape and np.array_equal(a.points, b.points) \
            and np.array_equal(a.labels, b.labels) and np.array_equal(a.masses, b.masses)
        assert not same
