import json

import numpy as np
import pytest

from gradual_st import theory as th
from gradual_st.models import LinearModel
from gradual_st.shiftgen import CounterexampleSpec, gen_counterexample
from gradual_st.wasserstein import AssumptionViolation


def test_baselines_fail_example():
    r = th.verify_baselines_fail()
    assert r.passed
    assert r.measured["source_loss"] == 0.0 and r.measured["target_loss"] == 1.0
    assert r.measured["st_target_loss"] == 1.0
    assert all(abs(v - 2 / 3) <= 1e-9 for v in r.measured["rho"])


def test_baselines_fail_skips_outside_the_norm_ball():
    r = th.verify_baselines_fail(R=0.5)
    assert r.status == th.SKIPPED
    assert "assumption_violation" in r.diagnostics


def test_hinge_failure_examples():
    r = th.verify_hinge_failure(alpha=0.3)
    assert r.passed and r.measured["final_error"] == 1.0
    assert r.measured["initial_hinge"] == pytest.approx(0.3)
    # a large alpha caps the moving mass at one half
    assert th.verify_hinge_failure(alpha=3.0).passed


@pytest.mark.parametrize("T", [0, 1, 3])
def test_no_shift_linear_bound(T):
    r = th.verify_no_shift_linear_bound(T=T)
    assert r.passed
    assert r.measured["final_loss"] <= 0.2 * (T + 1) + 1e-12
    if T >= 1:
        assert r.measured["after_one_step"] >= 2 * 0.2 - 0.06


def test_no_regularization_fixed_point():
    r = th.verify_no_regularization_fixed_point()
    assert r.passed and r.measured["objective"] == 0.0
    with pytest.raises(ValueError):
        th.verify_no_regularization_fixed_point(LinearModel([1.0, 0.0], 0.0), np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_soft_label_fixed_point():
    assert th.verify_soft_label_fixed_point().passed
    assert th.verify_soft_label_fixed_point(theta=LinearModel.zeros(2)).passed
    with pytest.raises(ValueError):
        th.verify_soft_label_fixed_point(n_probes=10)


def test_exponential_rejects_large_initial_loss():
    with pytest.raises(ValueError):
        th.verify_exponential_growth(alpha0=0.3, T=1)


def test_exponential_growth_under_exact_solver_is_frozen():
    # Derived with the global d <= 2 solver: one exact step already finds a
    # model with zero loss on the next distribution, so the claimed growth
    # does not materialise with globally optimal retraining.
    r = th.verify_exponential_growth(T=1, advisory=True)
    assert r.status == th.FAIL
    assert r.measured["initial_loss"] == pytest.approx(0.2, abs=1e-12)
    assert r.measured["final_loss"] == pytest.approx(0.0, abs=1e-12)
    assert r.measured["witness_loss"] == 0.0
    assert r.diagnostics["exact_losses"] == pytest.approx([0.12, 0.0], abs=1e-12)
    assert r.diagnostics["exact_trajectory"][0].b == pytest.approx(0.5)
    # a local solver started at the initial model does show the growth
    assert max(r.diagnostics["advisory_cccp_losses"]) >= 0.4


@pytest.mark.xfail(strict=True, reason="exact retraining escapes the construction; see the frozen test above")
def test_exponential_growth_claim():
    assert th.verify_exponential_growth(T=1, advisory=False).passed


@pytest.mark.parametrize("name", ["baselines_fail", "hinge_failure", "exponential_growth[T=1]", "no_shift_linear_bound[T=2]"])
def test_sabotage_turns_checks_red(name):
    assert th._run_claim(name, True).status == th.FAIL


def test_bound_instance_validation():
    P, Q = th.random_gradual_pair(np.random.default_rng(0), steps=1)
    inst = th.BoundCheckInstance.build(P, Q, LinearModel([1.0, 0.0], 0.0, 1.0), 1.0, 200, 0.1)
    assert inst.rho <= 0.5 + 1e-12 and inst.B > 0
    with pytest.raises(AssumptionViolation):
        th.BoundCheckInstance(P, Q, LinearModel([1.0, 0.0], 0.0, 1.0), 1.0, 1.5, inst.alpha_star, inst.B)


def test_bound_checks_on_few_trials():
    r = th.check_theorem_bound(trials=5, seed=1)
    assert r.passed and r.measured["bound_holds"] == 5
    assert th.check_corollary_chain(T=2, trials=2).passed


def test_gaussian_recovery_without_shifts_keeps_the_start():
    r = th.verify_gaussian_recovery(shifts=[], mc_samples=20_000, lipschitz_pairs=10)
    assert r.measured["final_deviation"] == pytest.approx(0.2, abs=1e-12)
    assert r.measured["lipschitz_pairs_ok"] == 10


def test_suite_registry_and_exit_status():
    assert set(th.SUITES) == {"margin", "gaussian", "all"}
    assert set(th.SUITES["all"]) == set(th.SUITES["margin"]) | set(th.SUITES["gaussian"])
    mk = lambda s: th.VerificationResult("c", {}, {}, {}, s, 0.0)
    assert th.suite_exit_status([mk(th.PASS)]) == 0
    assert th.suite_exit_status([mk(th.PASS), mk(th.SKIPPED)]) == 2
    assert th.suite_exit_status([mk(th.INCONCLUSIVE), mk(th.FAIL)]) == 1
    with pytest.raises(ValueError):
        th.run_suite("bogus")
    with pytest.raises(ValueError):
        th.run_suite("margin", sabotage=["theorem_bound"])


def test_run_suite_subset_serialises():
    results = th.run_suite("margin", only=["hinge_failure", "baselines_fail"])
    assert [r.claim for r in results] == ["baselines_fail", "hinge_failure"]
    dumped = json.dumps([r.to_dict() for r in results])
    assert json.loads(dumped)[0]["status"] == "pass"
    assert "hinge_failure" in th.format_table(results)
