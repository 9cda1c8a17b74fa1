import numpy as np
import pytest

from errors import UsageError
from processors.two_sample import energy_test, standardize_pair, wilson_interval


def test_same_law_is_not_rejected(rng):
    A = rng.standard_normal((150, 3))
    B = rng.standard_normal((150, 3))
    result = energy_test(A, B, permutations=199, rng=rng)
    assert result.p_value >= 0.001
    assert result.n_a == result.n_b == 150
    assert result.permutations == 199


def test_shifted_law_is_rejected(rng):
    A = rng.standard_normal((100, 2))
    B = rng.standard_normal((100, 2)) + 1.0
    result = energy_test(A, B, permutations=199, rng=rng)
    assert result.p_value == pytest.approx(1 / 200)
    assert result.statistic > 0


def test_p_value_is_reproducible():
    data = np.random.default_rng(1).standard_normal((60, 2))
    first = energy_test(data[:30], data[30:], 99, np.random.default_rng(5))
    second = energy_test(data[:30], data[30:], 99, np.random.default_rng(5))
    assert first == second


def test_energy_arguments(rng):
    with pytest.raises(UsageError):
        energy_test(np.ones((3, 2)), np.ones((3, 3)), 9, rng)
    with pytest.raises(UsageError):
        energy_test(np.ones((0, 2)), np.ones((3, 2)), 9, rng)


def test_wilson_interval():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    low, high = wilson_interval(50, 100)
    assert low < 0.5 < high
    assert low == pytest.approx(0.4038, abs=1e-3)
    assert high == pytest.approx(0.5962, abs=1e-3)


def test_standardize_pair(rng):
    A, B = standardize_pair(rng.normal(5, 3, (40, 2)), rng.normal(5, 3, (60, 2)))
    pooled = np.vstack([A, B])
    np.testing.assert_allclose(pooled.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(pooled.std(axis=0), 1, atol=1e-12)
