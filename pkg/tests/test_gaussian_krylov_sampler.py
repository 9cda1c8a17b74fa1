import math

import numpy as np
import pytest

from errors import NumericalError, OracleError
from models import SamplerMethod
from processors import gaussian_krylov_sampler as gauss
from processors.query_oracle import make_matvec_oracle
from processors.two_sample import energy_test
from routes.gauss import KL_COLUMNS


def test_isotropic_plan_returns_the_seed_draw():
    p = gauss.plan(1.0, 5, 0.1)
    assert p.method == SamplerMethod.KRYLOV
    assert p.query_budget == 0
    oracle = make_matvec_oracle(np.eye(5))
    y = gauss.sample(p, oracle, np.random.default_rng(3))
    expected = np.random.default_rng(3).standard_normal((5, 1))[:, 0]
    np.testing.assert_array_equal(y, expected)
    assert oracle.query_count == 0


def test_small_dimension_uses_exact_path():
    p = gauss.plan(1e4, 3, 0.1)
    assert p.method == SamplerMethod.EXACT
    assert p.query_budget == 3
    oracle = make_matvec_oracle(np.diag([1.0, 50.0, 1e4]))
    gauss.sample(p, oracle, np.random.default_rng(0))
    assert oracle.query_count == 3


def test_exact_batch_charges_dimension_once():
    p = gauss.plan(1e4, 3, 0.1)
    oracle = make_matvec_oracle(np.diag([1.0, 50.0, 1e4]))
    samples = gauss.sample_many(p, oracle, 5, np.random.default_rng(0))
    assert samples.shape == (5, 3)
    assert oracle.query_count == 3


def test_large_dimension_uses_krylov_path():
    p = gauss.plan(16, 4096, 0.1)
    assert p.method == SamplerMethod.KRYLOV
    assert p.query_budget == p.degree
    assert p.degree <= 8 * 4 * math.log(4096 / 0.1)
    assert p.delta == pytest.approx(0.1 / (4 * 64))


def test_krylov_sample_costs_degree_queries():
    p = gauss.plan(4, 32, 0.3)
    assert p.method == SamplerMethod.KRYLOV
    oracle = make_matvec_oracle(np.diag(np.linspace(1, 4, 32)))
    gauss.sample(p, oracle, np.random.default_rng(1))
    assert oracle.query_count == p.degree


def test_dimension_mismatch():
    p = gauss.plan(4, 8, 0.3)
    with pytest.raises(OracleError):
        gauss.sample(p, make_matvec_oracle(np.eye(6)), np.random.default_rng(0))


@pytest.mark.slow
def test_empirical_covariance_matches_inverse():
    spectrum = np.linspace(1, 16, 8)
    p = gauss.plan(16, 8, 0.1)
    samples = gauss.sample_many(p, make_matvec_oracle(np.diag(spectrum)), 100_000, np.random.default_rng(7))
    sigma = np.diag(1.0 / spectrum)
    empirical = np.cov(samples, rowvar=False)
    se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma ** 2) / len(samples))
    assert np.all(np.abs(empirical - sigma) <= 5 * se)


def test_krylov_law_matches_direct_draws():
    spectrum = np.linspace(1, 4, 12)
    p = gauss.plan(4, 12, 0.3)
    assert p.method == SamplerMethod.KRYLOV
    krylov = gauss.sample_many(p, make_matvec_oracle(np.diag(spectrum)), 300, np.random.default_rng(11))
    scale = gauss.plan_polynomial(p)(spectrum)
    direct = np.random.default_rng(12).standard_normal((300, 12)) * scale
    result = energy_test(krylov, direct, permutations=200, rng=np.random.default_rng(13))
    assert result.p_value >= 0.001


def test_exact_kl_identical_is_zero():
    sigma = np.diag([1.0, 2.0, 3.0])
    kl, bound = gauss.exact_kl_centered(sigma, sigma)
    assert kl == pytest.approx(0.0, abs=1e-14)
    assert bound == pytest.approx(0.0, abs=1e-14)


def test_exact_kl_scalar():
    kl, _ = gauss.exact_kl_centered(np.array([[2.0]]), np.array([[1.0]]))
    assert kl == pytest.approx(0.5 * (2 - 1 - math.log(2)), rel=1e-12)
    assert kl == pytest.approx(0.15343, abs=1e-5)


def test_exact_kl_rejects_non_spd():
    with pytest.raises(NumericalError):
        gauss.exact_kl_centered(np.diag([1.0, -1.0]), np.eye(2))


def test_diagonal_kl_agrees_with_matrix_formula():
    spectrum = np.linspace(1, 16, 10)
    p = gauss.plan(16, 10, 0.3)
    if p.method == SamplerMethod.KRYLOV:
        q = gauss.plan_polynomial(p)(spectrum)
        kl, bound = gauss.exact_kl_centered(np.diag(q ** 2), np.diag(1.0 / spectrum))
    else:
        kl, bound = 0.0, 0.0
    d_kl, d_bound = gauss.diagonal_kl(p, spectrum)
    assert d_kl == pytest.approx(kl, rel=1e-8, abs=1e-15)
    assert d_bound == pytest.approx(bound, rel=1e-8, abs=1e-15)
    assert d_kl <= d_bound


@pytest.mark.parametrize("kappa", [4, 16, 64])
@pytest.mark.parametrize("dim", [16, 256])
@pytest.mark.parametrize("eps", [0.3, 0.1])
@pytest.mark.parametrize("kind", gauss.SPECTRUM_KINDS)
def test_kl_guarantee_in_closed_form(kappa, dim, eps, kind):
    row = gauss.kl_table_row(kappa, dim, eps, kind)
    assert row["exact_kl"] <= eps ** 2
    assert row["queries"] <= dim
    assert row["tv_bound"] == pytest.approx(math.sqrt(row["exact_kl"] / 2))


def test_spectrum_families_cover_the_range():
    for kind in gauss.SPECTRUM_KINDS:
        s = gauss.spectrum_family(kind, 9, 25.0)
        assert len(s) == 9
        assert s.min() == pytest.approx(1.0) and s.max() == pytest.approx(25.0)


def test_kl_table_columns():
    required = {"kappa", "dim", "eps", "degree", "exact_kl", "paper_bound"}
    assert required <= set(KL_COLUMNS)
    row = gauss.kl_table_row(16, 512, 0.1, "uniform")
    assert list(row) == KL_COLUMNS
    p = gauss.plan(16, 512, 0.1)
    _, bound = gauss.diagonal_kl(p, gauss.spectrum_family("uniform", 512, 16))
    assert row["paper_bound"] == pytest.approx(bound)
    assert row["exact_kl"] <= row["paper_bound"]
