import numpy as np
import pytest

from errors import ContractViolation, UsageError
from processors import krylov_reduction_sim as reduction
from processors.query_oracle import make_matvec_oracle


def _unit_off(fixed, rng, d):
    v = rng.standard_normal(d)
    Q = reduction.orthonormal_basis(fixed, d)
    v -= Q @ (Q.T @ v)
    return v / np.linalg.norm(v)


def test_index_pairs():
    assert reduction.index_pairs(0) == []
    assert reduction.index_pairs(2) == [(0, 1), (1, 1), (0, 2), (2, 1), (1, 2)]


def test_orthonormal_basis_drops_dependent_vectors():
    e1, e2 = np.eye(4)[0], np.eye(4)[1]
    Q = reduction.orthonormal_basis([e1, 2 * e1, e1 + e2], 4)
    assert Q.shape == (4, 2)
    np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-14)
    assert reduction.orthonormal_basis([], 4).shape == (4, 0)


def test_orthogonalized_direction():
    e = np.eye(3)
    np.testing.assert_allclose(reduction.orthogonalized_direction(e[0] + 2 * e[1], [e[0]]), e[1])
    with pytest.raises(ContractViolation):
        reduction.orthogonalized_direction(3 * e[0], [e[0]])


class TestBuildRotation:
    def test_fixes_span_and_sends_y_to_z(self, rng):
        d = 8
        fixed = [rng.standard_normal(d) for _ in range(3)]
        y, z = _unit_off(fixed, rng, d), _unit_off(fixed, rng, d)
        U = reduction.build_rotation(fixed, y, z)
        np.testing.assert_allclose(U @ U.T, np.eye(d), atol=1e-12)
        assert np.linalg.det(U) == pytest.approx(1.0)
        np.testing.assert_allclose(U.T @ y, z, atol=1e-12)
        for x in fixed:
            np.testing.assert_allclose(U.T @ x, x, atol=1e-12)

    def test_equal_directions_give_identity(self, rng):
        y = _unit_off([], rng, 5)
        np.testing.assert_array_equal(reduction.build_rotation([], y, y), np.eye(5))

    def test_rejects_bad_inputs(self, rng):
        d = 5
        fixed = [np.eye(d)[0]]
        y = _unit_off(fixed, rng, d)
        with pytest.raises(UsageError):
            reduction.build_rotation(fixed, 2 * y, y)
        with pytest.raises(UsageError):
            reduction.build_rotation(fixed, np.eye(d)[0], y)
        with pytest.raises(UsageError):
            reduction.build_rotation(list(np.eye(d)[:4]), np.eye(d)[4], np.eye(d)[4])


class TestAdaptiveRun:
    def test_power_transcript(self, rng):
        lam = reduction.haar_conjugate(np.arange(1.0, 11.0), rng)
        oracle = make_matvec_oracle(lam)
        transcript = reduction.run_adaptive(reduction.get_algorithm("power"), oracle, 2)
        assert list(transcript) == reduction.index_pairs(2)
        np.testing.assert_allclose(transcript[(0, 1)], np.eye(10)[0])
        for (i, j), v in transcript.items():
            if i > 0:
                np.testing.assert_allclose(v, lam @ transcript[(i - 1, j)], atol=1e-12)
        assert abs(transcript[(0, 2)] @ transcript[(0, 1)]) < 1e-12
        assert abs(transcript[(0, 2)] @ transcript[(1, 1)]) < 1e-12
        assert oracle.query_count == 3

    def test_depth_limit(self):
        with pytest.raises(UsageError):
            reduction.run_adaptive(reduction.get_algorithm("fresh"), np.eye(9), 3)

    def test_unknown_algorithm(self):
        with pytest.raises(UsageError):
            reduction.get_algorithm("newton")


class TestSimulation:
    @pytest.mark.parametrize("name", sorted(reduction.ALGORITHMS))
    def test_identities_hold(self, rng, name):
        alg = reduction.get_algorithm(name)
        lam = reduction.haar_conjugate(reduction.reference_spectrum(20), rng)
        data = reduction.KrylovData.generate(lam, 3, rng)
        _, state = reduction.simulate_from_krylov(alg, data)
        residuals = reduction.identity_residuals(state, alg, lam)
        assert residuals.audit_passed
        assert max(residuals.P2_max, residuals.P3_max, residuals.P4_max) < 1e-8
        assert residuals.orthogonality_max < 1e-8

    @pytest.mark.parametrize("name", sorted(reduction.ALGORITHMS))
    def test_simulated_transcript_is_adaptive_run_on_rotated_matrix(self, rng, name):
        alg = reduction.get_algorithm(name)
        d, K = 16, 3
        lam = reduction.haar_conjugate(reduction.reference_spectrum(d), rng)
        transcript, state = reduction.simulate_from_krylov(alg, reduction.KrylovData.generate(lam, K, rng))
        U = state.product(np.eye(d), K)
        adaptive = reduction.run_adaptive(alg, U.T @ lam @ U, K)
        for pair in reduction.index_pairs(K):
            np.testing.assert_allclose(transcript[pair], adaptive[pair], atol=1e-8)

    def test_unrotated_simulation_is_plain_krylov(self, rng):
        lam = reduction.haar_conjugate(reduction.reference_spectrum(12), rng)
        data = reduction.KrylovData.generate(lam, 2, rng)
        transcript, state = reduction.simulate_from_krylov(reduction.get_algorithm("power"), data, rotate=False)
        z1 = data.get(0, 1, 1)
        np.testing.assert_allclose(transcript[(0, 1)], z1 / np.linalg.norm(z1))
        np.testing.assert_allclose(transcript[(1, 1)], lam @ transcript[(0, 1)], atol=1e-10)
        assert data.audit_passed()

    def test_audit_flags_early_access(self, rng):
        data = reduction.KrylovData.generate(np.eye(10), 2, rng)
        data.get(1, 2, 1)
        assert not data.audit_passed()

    def test_depth_limit(self, rng):
        data = reduction.KrylovData.generate(np.eye(4), 2, rng)
        with pytest.raises(UsageError):
            reduction.simulate_from_krylov(reduction.get_algorithm("fresh"), data)


def test_transcript_summary_length(rng):
    transcript = reduction.run_adaptive(reduction.get_algorithm("fresh"), np.diag(np.arange(1.0, 9.0)), 2)
    assert reduction.transcript_summary(transcript, 2).shape == (15 + 3 * 5,)


class TestReductionExperiment:
    def test_report(self):
        report = reduction.reduction_experiment("hybrid", 12, 2, 30, seed=11, permutations=49)
        assert report.identity_residuals.audit_passed
        assert report.identity_residuals.P2_max < 1e-8
        assert 0 < report.two_sample.p_value <= 1
        assert report.negative_control is not None
        assert report.two_sample.n_a == report.two_sample.n_b == 30

    def test_without_control_and_explicit_spectrum(self):
        spectrum = np.repeat([1.0, 3.0, 9.0], 4)
        report = reduction.reduction_experiment("power", 12, 2, 10, seed=2, permutations=19,
                                                negative_control=False, spectrum=spectrum)
        assert report.negative_control is None

    def test_arguments(self):
        with pytest.raises(UsageError):
            reduction.reduction_experiment("power", 9, 3, 5, seed=1)
        with pytest.raises(UsageError):
            reduction.reduction_experiment("power", 12, 2, 5, seed=1, spectrum=np.ones(5))


class TestConditioning:
    def test_triangular_index(self):
        assert [reduction.triangular_index(m) for m in (0, 1, 2, 3, 5, 6)] == [0, 1, 1, 2, 2, 3]

    def test_haar_fixing(self, rng):
        span = [rng.standard_normal(6) for _ in range(2)]
        V = reduction.haar_fixing(span, 6, rng)
        np.testing.assert_allclose(V @ V.T, np.eye(6), atol=1e-12)
        for x in span:
            np.testing.assert_allclose(V @ x, x, atol=1e-12)

    def test_swap_reflection(self):
        R = reduction.swap_reflection(4)
        np.testing.assert_allclose(R @ np.eye(4)[0], np.eye(4)[1], atol=1e-15)

    def test_check_runs(self):
        result = reduction.conditioning_lemma_check(6, 2, 40, seed=5, permutations=49)
        assert 0 < result.p_value <= 1
        assert result.n_a == result.n_b == 40

    def test_arguments(self):
        with pytest.raises(UsageError):
            reduction.conditioning_lemma_check(17, 1, 5, seed=1)
        with pytest.raises(UsageError):
            reduction.conditioning_lemma_check(6, 0, 5, seed=1)
