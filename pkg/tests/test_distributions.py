import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradual_st.distributions import (
    DataError,
    DiscreteDistribution,
    DomainSequence,
    GaussianMixtureDomain,
    LabeledPoints,
    empirical_distribution,
    read_csv,
    read_weighted_csv,
    sample_domain,
    second_moment_bound,
    write_csv,
)


def test_degenerate_covariance_gives_point_masses():
    dom = GaussianMixtureDomain([3.0, 0.0], [-3.0, 0.0], 1e-12 * np.eye(2), 1e-12 * np.eye(2), 0.5)
    s = sample_domain(dom, 4, seed=7)
    assert np.all(np.abs(s.x[s.y == 1] - [3, 0]) < 1e-5)
    assert np.all(np.abs(s.x[s.y == -1] - [-3, 0]) < 1e-5)


def test_sampling_is_deterministic():
    dom = GaussianMixtureDomain.isotropic([1.0, 2.0], 0.3)
    a, b = sample_domain(dom, 50, 3), sample_domain(dom, 50, 3)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_empirical_class_means():
    dom = GaussianMixtureDomain([1.0, 0.0], [-1.0, 0.0], 0.25 * np.eye(2), 0.25 * np.eye(2))
    s = sample_domain(dom, 100_000, seed=1)
    assert np.all(np.abs(s.x[s.y == 1].mean(axis=0) - [1, 0]) < 0.02)
    assert np.all(np.abs(s.x[s.y == -1].mean(axis=0) - [-1, 0]) < 0.02)


def test_sampling_errors():
    dom = GaussianMixtureDomain.isotropic([1.0], 1.0)
    with pytest.raises(ValueError):
        sample_domain(dom, 0, 0)
    with pytest.raises(DataError):
        GaussianMixtureDomain([0.0, 0.0], [1.0, 1.0], -np.eye(2), np.eye(2))
    with pytest.raises(DataError):
        GaussianMixtureDomain([0.0, 0.0], [1.0, 1.0], np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(2))


def test_rank_deficient_covariance_is_allowed():
    cov = np.array([[1.0, 1.0], [1.0, 1.0]])
    s = sample_domain(GaussianMixtureDomain([0.0, 0.0], [0.0, 0.0], cov, cov), 200, 0)
    assert np.allclose(s.x[:, 0], s.x[:, 1], atol=1e-8)


def test_empirical_distribution_examples():
    d = empirical_distribution([((1, 1), 1), ((-1, -1), -1)])
    assert len(d) == 2 and np.allclose(d.masses, 0.5)
    d = empirical_distribution([((0,), 1), ((0,), 1)])
    assert len(d) == 1 and d.masses[0] == 1.0
    d = empirical_distribution([((0,), 1), ((1,), 1), ((2,), -1)])
    assert abs(d.masses.sum() - 1) <= 1e-12 and np.allclose(d.masses, 1 / 3)
    with pytest.raises(ValueError):
        empirical_distribution([])


def test_same_point_different_labels_stay_separate():
    d = DiscreteDistribution([[0.0], [0.0]], [1, -1])
    assert len(d) == 2
    x, m = d.marginal()
    assert len(x) == 1 and m[0] == pytest.approx(1.0)


def test_distribution_validation():
    with pytest.raises(DataError):
        DiscreteDistribution([[0.0]], [0])
    with pytest.raises(DataError):
        DiscreteDistribution([[0.0], [1.0]], [1, 1], [0.5, 0.6])
    with pytest.raises(DataError):
        DiscreteDistribution([[0.0], [1.0]], [1, 1], [1.0, 0.0])
    with pytest.raises(DataError):
        DiscreteDistribution(np.empty((0, 2)), [])


def test_second_moment_examples():
    assert second_moment_bound(DiscreteDistribution([[3.0, 4.0]], [1])) == 25.0
    assert second_moment_bound(DiscreteDistribution([[1.0, 0.0], [-1.0, 0.0]], [1, -1])) == 1.0
    p0 = DiscreteDistribution([[1.0, 1.0], [-1.0, -1.0]], [1, -1])
    assert second_moment_bound(p0) == 2.0


@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.sampled_from([-1, 1])), min_size=1, max_size=12),
       st.integers(1, 5))
@settings(max_examples=100, deadline=None)
def test_empirical_of_repeated_copies_matches(rows, k):
    pts = [((a, b), y) for a, b, y in rows]
    base = empirical_distribution(pts)
    rep = empirical_distribution(pts * k)
    assert len(base) == len(rep)
    assert np.array_equal(base.points, rep.points) and np.array_equal(base.labels, rep.labels)
    assert np.allclose(base.masses, rep.masses, atol=1e-12, rtol=0)
    assert abs(rep.masses.sum() - 1) <= 1e-12


def test_csv_round_trip(tmp_path):
    x = np.array([[0.1, -2.0], [1 / 3, 5.0]])
    write_csv(tmp_path / "a.csv", x, np.array([1, -1]))
    x2, y2 = read_csv(tmp_path / "a.csv")
    assert np.array_equal(x, x2) and list(y2) == [1, -1]
    write_csv(tmp_path / "u.csv", x)
    assert read_csv(tmp_path / "u.csv")[1] is None
    write_csv(tmp_path / "w.csv", x, np.array([1, -1]), np.array([0.25, 0.75]))
    x3, y3, m3 = read_weighted_csv(tmp_path / "w.csv")
    assert np.array_equal(x3, x) and list(y3) == [1, -1] and list(m3) == [0.25, 0.75]


def test_csv_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x0,y\n1.0,1\n2.0,7\n")
    with pytest.raises(DataError, match=":3:"):
        read_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError, match=":1:"):
        read_csv(p)


def test_domain_sequence_save_load(tmp_path):
    seq = DomainSequence(
        LabeledPoints(np.array([[0.0], [1.0]]), np.array([1, -1])),
        (np.array([[0.5]]), np.array([[0.7], [0.8]])),
        LabeledPoints(np.array([[2.0]]), np.array([1])),
        np.array([[3.0]]),
        {"generator": "test", "seed": 1},
    )
    seq.save(tmp_path)
    assert (tmp_path / "inter_0001.csv").exists() and (tmp_path / "meta.json").exists()
    back = DomainSequence.load(tmp_path)
    assert np.array_equal(back.flat_intermediate(), seq.flat_intermediate())
    assert np.array_equal(back.target_unlabeled, seq.target_unlabeled)
    assert back.metadata == seq.metadata
