import math

import numpy as np
import pytest

from config import settings
from errors import UsageError
from processors import lowdim_sampler as lowdim
from processors.query_oracle import make_quadratic_oracle


def _sublevel(matrix):
    return lowdim.SublevelOracle(make_quadratic_oracle(np.asarray(matrix, dtype=float), record=False))


def test_membership_inside_and_outside():
    oracle = _sublevel(np.eye(2))
    assert lowdim.membership_separation(oracle, np.zeros(2)).inside
    result = lowdim.membership_separation(oracle, np.array([2.0, 0.0]))
    assert not result.inside
    np.testing.assert_allclose(result.normal, [2.0, 0.0])
    assert oracle.inner.query_count == 2


def test_smooth_ball_is_inside():
    kappa = 50.0
    oracle = _sublevel(np.diag([1.0, kappa]))
    for angle in np.linspace(0, 2 * np.pi, 17):
        x = math.sqrt(2 / kappa) * np.array([math.cos(angle), math.sin(angle)]) * 0.999
        assert lowdim.membership_separation(oracle, x).inside


def test_rounding_sandwiches_the_sublevel_set(rng):
    oracle = _sublevel(np.eye(2))
    rounding = lowdim.ellipsoid_round(oracle, 2, 1.0)
    values = 0.5 * np.sum(rounding.inner.boundary_points(1000, rng) ** 2, axis=1)
    assert np.all(values <= 1.0 + 1e-9)
    angles = rng.uniform(0, 2 * np.pi, 1000)
    circle = math.sqrt(2) * np.column_stack([np.cos(angles), np.sin(angles)])
    assert np.all(rounding.outer.contains(circle, tol=1e-9))
    assert rounding.queries <= rounding.query_budget


def test_rounding_inner_ellipsoid_is_inside_for_anisotropic_potential(rng):
    lam = np.diag([1.0, 100.0])
    rounding = lowdim.ellipsoid_round(_sublevel(lam), 2, 100.0)
    points = rounding.inner.boundary_points(1000, rng)
    values = 0.5 * np.einsum("ij,jk,ik->i", points, lam, points)
    assert np.all(values <= 1.0 + 1e-9)
    assert rounding.outer.dilation == pytest.approx(3 * math.sqrt(2))


def test_rounding_cost_grows_logarithmically():
    kappas = [10.0, 100.0, 1000.0, 10000.0]
    counts = []
    for kappa in kappas:
        counts.append(lowdim.ellipsoid_round(_sublevel(lowdim.quadratic_potential_matrix(kappa)), 2, kappa).queries)
    fit = lowdim.fit_log_signature(kappas, counts)
    assert fit["b"] > 0
    budget = settings.rounding_iteration_constant * 4 * 3
    assert all(c / math.log(k) <= budget for c, k in zip(counts, kappas))


def test_rounding_dimension_limits():
    with pytest.raises(UsageError):
        lowdim.ellipsoid_round(_sublevel(np.eye(1)), 1, 2.0)
    big = settings.lowdim_max_dim + 1
    with pytest.raises(UsageError):
        lowdim.ellipsoid_round(_sublevel(np.eye(big)), big, 2.0)


def test_rejection_radius():
    assert lowdim.rejection_radius(2, 0.01) == math.ceil(4 * (2 * math.log(2) + math.log(100)) + 8)


def test_uniform_in_unit_ball():
    draws = lowdim.uniform_in_ellipsoid(lowdim.Ellipsoid.ball(2, 1.0), np.random.default_rng(5), 100_000)
    inside_half = np.mean(np.linalg.norm(draws, axis=1) <= 0.5)
    assert abs(inside_half - 0.25) <= 5 * math.sqrt(0.25 * 0.75 / 100_000)
    assert np.all(np.abs(draws.mean(axis=0)) <= 5 * math.sqrt(0.25 / 100_000))
    assert np.all(np.linalg.norm(draws, axis=1) <= 1.0 + 1e-12)


def test_dilation_preserves_mahalanobis_radii():
    base = lowdim.Ellipsoid(np.array([1.0, -2.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
    wide = base.dilate(7.0)
    a = base.mahalanobis(lowdim.uniform_in_ellipsoid(base, np.random.default_rng(9), 500))
    b = wide.mahalanobis(lowdim.uniform_in_ellipsoid(wide, np.random.default_rng(9), 500))
    np.testing.assert_allclose(a, b, rtol=1e-9)


def test_rejection_samples_standard_gaussian():
    oracle = make_quadratic_oracle(np.eye(2), record=False)
    samples, stats = lowdim.sample_lowdim(oracle, 2, 1.0, 0.01, 3000, np.random.default_rng(21))
    n = len(samples)
    assert n == 3000
    assert np.all(np.abs(samples.mean(axis=0)) <= 5 / math.sqrt(n))
    cov = np.cov(samples, rowvar=False)
    se = np.sqrt((np.ones((2, 2)) + np.eye(2)) / n)
    assert np.all(np.abs(cov - np.eye(2)) <= 5 * se)
    assert stats["total_queries"] == stats["rounding_queries"] + stats["proposals"]
    assert stats["acceptance_in_inner"] >= math.exp(-1)


def test_rejection_samples_anisotropic_gaussian():
    lam = np.diag([1.0, 50.0])
    oracle = make_quadratic_oracle(lam, record=False)
    samples, _ = lowdim.sample_lowdim(oracle, 2, 50.0, 0.01, 3000, np.random.default_rng(22))
    sigma = np.diag([1.0, 0.02])
    cov = np.cov(samples, rowvar=False)
    se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma ** 2) / len(samples))
    assert np.all(np.abs(cov - sigma) <= 5 * se)


def test_single_rejection_sample_is_in_region():
    oracle = make_quadratic_oracle(np.eye(2), record=False)
    rounding = lowdim.ellipsoid_round(lowdim.SublevelOracle(oracle), 2, 1.0)
    x = lowdim.rejection_sample(oracle, rounding.outer, 2, 0.01, np.random.default_rng(4))
    assert rounding.outer.dilate(lowdim.rejection_radius(2, 0.01)).contains(x[None, :])[0]


def test_binned_tv_of_exact_draws_is_small():
    samples = np.random.default_rng(31).standard_normal((100_000, 2))
    tv = lowdim.binned_tv_against_quadrature(
        samples, lambda pts: 0.5 * np.sum(pts ** 2, axis=1), ((-5.0, 5.0), (-5.0, 5.0)), bins=20
    )
    assert tv <= 0.03


def test_fit_log_signature_recovers_a_line():
    kappas = [10.0, 100.0, 1000.0]
    fit = lowdim.fit_log_signature(kappas, [3 + 2 * math.log(k) for k in kappas])
    assert fit["a"] == pytest.approx(3.0)
    assert fit["b"] == pytest.approx(2.0)
    assert fit["r2"] == pytest.approx(1.0)
