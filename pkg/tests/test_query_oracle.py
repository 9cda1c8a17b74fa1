import numpy as np
import pytest

from errors import ContractViolation, OracleError
from processors.query_oracle import (
    QueryLog,
    enumeration_order,
    extended_index_set,
    make_matvec_oracle,
    make_quadratic_oracle,
)


def test_identity_potential_and_gradient():
    oracle = make_quadratic_oracle(np.eye(2))
    value, grad = oracle.evaluate(np.array([1.0, 1.0]))
    assert value == pytest.approx(1.0)
    np.testing.assert_allclose(grad, [1.0, 1.0])


def test_diagonal_potential_and_gradient():
    oracle = make_quadratic_oracle(np.diag([1.0, 4.0]))
    value, grad = oracle.evaluate(np.array([0.0, 1.0]))
    assert value == pytest.approx(2.0)
    np.testing.assert_allclose(grad, [0.0, 4.0])


def test_query_count_and_log_length():
    oracle = make_quadratic_oracle(np.diag([2.0, 3.0]))
    for x in ([1.0, 0.0], [0.0, 1.0], [1.0, 1.0]):
        oracle.evaluate(np.array(x))
    assert oracle.query_count == 3
    assert len(oracle.log) == 3
    assert [r.index for r in oracle.log.records] == [0, 1, 2]


def test_evaluate_many_charges_one_query_per_row():
    oracle = make_quadratic_oracle(np.diag([1.0, 2.0]), record=False)
    values = oracle.evaluate_many(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(values, [0.5, 1.0, 1.5])
    assert oracle.query_count == 3


def test_matvec_block_costs_columns():
    lam = np.diag([1.0, 2.0, 3.0])
    oracle = make_matvec_oracle(lam)
    out = oracle.query(np.eye(3)[:, :2])
    np.testing.assert_allclose(out, lam[:, :2])
    oracle.query(np.ones(3))
    assert oracle.query_count == 3


def test_rejects_asymmetric_matrix():
    with pytest.raises(OracleError):
        make_quadratic_oracle(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_rejects_indefinite_matrix():
    with pytest.raises(OracleError):
        make_quadratic_oracle(np.diag([1.0, -1.0]))


def test_dimension_mismatch_is_an_error():
    oracle = make_quadratic_oracle(np.eye(3))
    with pytest.raises(OracleError):
        oracle.evaluate(np.ones(2))
    assert oracle.query_count == 0


def test_hidden_matrix_only_for_white_box():
    lam = np.diag([1.0, 2.0])
    assert np.array_equal(make_quadratic_oracle(lam, white_box=True).hidden_matrix, lam)
    with pytest.raises(OracleError):
        make_quadratic_oracle(lam).hidden_matrix


def test_query_log_cap():
    log = QueryLog(cap=2)
    log.append(np.zeros(1), ())
    log.append(np.zeros(1), ())
    with pytest.raises(ContractViolation):
        log.append(np.zeros(1), ())


def test_gradient_matches_finite_differences(rng):
    G = rng.standard_normal((5, 5))
    lam = G @ G.T + np.eye(5)
    oracle = make_quadratic_oracle(lam, record=False)
    for _ in range(100):
        x = rng.standard_normal(5)
        _, grad = oracle.evaluate(x)
        h = 1e-5 * (1 + np.abs(x))
        fd = np.array([
            (oracle.potential(x + h[i] * e) - oracle.potential(x - h[i] * e)) / (2 * h[i])
            for i, e in enumerate(np.eye(5))
        ])
        np.testing.assert_allclose(fd, grad, rtol=1e-6, atol=1e-6 * np.abs(grad).max())


def test_extended_index_set_small_cases():
    assert list(extended_index_set(1)) == [(0, 1), (1, 1)]
    assert list(extended_index_set(2)) == [(0, 1), (1, 1), (0, 2), (2, 1), (1, 2)]


def test_extended_index_set_boundaries_and_nesting():
    for k in range(1, 65):
        H = extended_index_set(k)
        assert (0, k) in H
        assert (k + 1, 1) not in H
        assert set(H) <= set(extended_index_set(k + 1))
        assert len(H) == k * (k + 3) // 2


def test_extended_index_set_rejects_zero():
    with pytest.raises(ValueError):
        extended_index_set(0)


def test_enumeration_order():
    assert enumeration_order(3) == [(0, 1), (1, 1), (0, 2)]
    assert enumeration_order(6)[3:] == [(2, 1), (1, 2), (0, 3)]
    for k in range(1, 10):
        assert enumeration_order(k * (k + 1) // 2)[-1] == (0, k)
