import math

import numpy as np
import pytest

from errors import InfeasibleProblem, UsageError
from models import WishartNormalization
from processors import hard_instances as hard
from processors.hard_instances import _simplex_maximize
from processors.query_oracle import make_matvec_oracle


def _random_spd(d, rng):
    G = rng.standard_normal((d, d))
    return G @ G.T / d + 0.5 * np.eye(d)


class TestEnsembles:
    def test_wishart_normalizations(self, rng):
        traces = [np.trace(hard.sample_wishart(6, WishartNormalization.UNIT, rng).matrix) for _ in range(2000)]
        assert np.mean(traces) == pytest.approx(6.0, rel=0.05)
        sample = hard.sample_wishart((3, 10), WishartNormalization.STANDARD, rng)
        assert sample.matrix.shape == (3, 3)
        np.testing.assert_allclose(sample.matrix, sample.matrix.T)
        assert np.linalg.eigvalsh(sample.matrix)[0] > 0

    def test_wishart_rejects_empty_dims(self, rng):
        with pytest.raises(UsageError):
            hard.sample_wishart((0, 3), WishartNormalization.UNIT, rng)

    def test_goe_variances(self, rng):
        draws = np.array([hard.sample_goe(2, rng) for _ in range(20_000)])
        np.testing.assert_allclose(draws, np.transpose(draws, (0, 2, 1)))
        assert np.var(draws[:, 0, 0]) == pytest.approx(1.0, abs=0.05)
        assert np.var(draws[:, 0, 1]) == pytest.approx(0.5, abs=0.03)

    def test_haar_rotation_is_orthogonal(self, rng):
        U = hard.haar_rotation(7, rng)
        np.testing.assert_allclose(U @ U.T, np.eye(7), atol=1e-12)


class TestSmallestEigenvalue:
    def test_edelman_limit(self):
        assert hard.edelman_tail(0.0) == 0.0
        assert hard.edelman_tail(0.25) < hard.edelman_tail(1.0) < 1.0

    def test_tail_rows(self):
        rows = hard.smallest_eig_tail(8, [1.0, 0.25], 2000, seed=3)
        assert [r["x"] for r in rows] == [0.25, 1.0]
        assert hard.tail_is_monotone(rows)
        for r in rows:
            assert r["ci_low"] <= r["estimate"] <= r["ci_high"]
            assert r["ratio"] == pytest.approx(r["estimate"] / math.sqrt(r["x"]))

    def test_tail_arguments(self):
        assert hard.smallest_eig_tail(8, [0.5], 0, seed=1) == []
        with pytest.raises(UsageError):
            hard.smallest_eig_tail(1, [0.5], 10, seed=1)
        with pytest.raises(UsageError):
            hard.smallest_eig_tail(8, [1.5], 10, seed=1)

    def test_samples_are_reproducible(self):
        np.testing.assert_array_equal(hard.lambda_min_samples(5, 300, 9), hard.lambda_min_samples(5, 300, 9))


class TestInverseTrace:
    def test_estimator_mean_of_squared_norms(self):
        samples = np.array([[1.0, 0.0], [0.0, 2.0], [5.0, 5.0]])
        assert hard.inverse_trace_estimator(samples, 2) == pytest.approx(2.5)
        assert hard.inverse_trace_estimator(lambda m: np.ones((m, 3)), 4) == pytest.approx(3.0)

    def test_estimator_arguments(self):
        with pytest.raises(UsageError):
            hard.inverse_trace_estimator(np.ones((2, 2)), 0)
        with pytest.raises(UsageError):
            hard.inverse_trace_estimator(np.ones((2, 2)), 3)

    def test_squared_norm_variance(self, rng):
        result = hard.squared_norm_variance(np.diag([1.0, 2.0, 3.0]), 50_000, rng)
        assert result["expected"] == pytest.approx(28.0)
        assert abs(result["z_score"]) < 5

    def test_minorization_holds(self, rng):
        result = hard.posterior_minorization_check(2, 5, 50, rng)
        assert result["violations"] == 0
        assert result["max_gap"] <= 1e-10
        with pytest.raises(UsageError):
            hard.posterior_minorization_check(5, 5, 1, rng)

    @pytest.mark.parametrize("strategy", sorted(hard.INVERSE_TRACE_STRATEGIES))
    def test_full_budget_is_exact(self, rng, strategy):
        W = _random_spd(6, rng)
        oracle = make_matvec_oracle(W)
        estimate = hard.INVERSE_TRACE_STRATEGIES[strategy](oracle, 6, rng)
        assert oracle.query_count == 6
        assert estimate == pytest.approx(float(np.trace(np.linalg.inv(W))), rel=1e-8)

    def test_query_experiment(self):
        rows = hard.inverse_trace_query_experiment(8, "hutchinson", [8], 20, seed=4)
        assert rows[0]["success_rate"] == 1.0
        assert rows[0]["n"] == 8
        with pytest.raises(UsageError):
            hard.inverse_trace_query_experiment(8, "lanczos", [4], 2, seed=4)
        with pytest.raises(UsageError):
            hard.inverse_trace_query_experiment(8, "hutchinson", [9], 2, seed=4)


class TestMomentLP:
    def test_simplex_small_problem(self):
        A = np.array([[1.0, 2.0, 1.0, 0.0], [3.0, 1.0, 0.0, 1.0]])
        x, value = _simplex_maximize(A, np.array([4.0, 6.0]), np.array([1.0, 1.0, 0.0, 0.0]))
        assert value == pytest.approx(2.8)
        np.testing.assert_allclose(x[:2], [1.6, 1.2])

    def test_simplex_infeasible_and_unbounded(self):
        with pytest.raises(InfeasibleProblem):
            _simplex_maximize(np.array([[1.0, 1.0]]), np.array([-1.0]), np.array([1.0, 0.0]))
        with pytest.raises(InfeasibleProblem):
            _simplex_maximize(np.array([[1.0, -1.0]]), np.array([0.0]), np.array([1.0, 0.0]))

    @pytest.mark.parametrize("K", [1, 2])
    def test_lp_matches_bases_and_duality(self, K):
        x, x_prime, value, E, nodes = hard.moment_lp_optimum(K, 9.0, 64)
        assert value == pytest.approx(hard.brute_force_lp(K, 9.0, 64), rel=1e-7)
        assert value == pytest.approx(2 * 64 * E, rel=1e-6)
        assert x.sum() == pytest.approx(64) and x_prime.sum() == pytest.approx(64)
        assert len(nodes) == K + 2

    def test_brute_force_limited_to_small_depth(self):
        with pytest.raises(UsageError):
            hard.brute_force_lp(3, 9.0, 64)

    def test_strengthened_solution(self):
        K, d, c1 = 2, 64, 0.1
        pair = hard.solve_moment_lp(K, 16.0, d, c1)
        assert pair.x.sum() == pytest.approx(d)
        assert pair.x_prime.sum() == pytest.approx(d)
        assert pair.x.min() >= d / (2 * (K + 2)) - 1e-9
        assert np.max(np.abs(pair.x - pair.x_prime) / pair.x) <= 2 * c1 / (1 - c1) + 1e-12
        objective = float(np.sum((pair.x - pair.x_prime) / pair.nodes))
        assert objective >= c1 * d * pair.minimax_error * (1 - 1e-9)

    def test_solve_arguments(self):
        with pytest.raises(UsageError):
            hard.solve_moment_lp(0, 16.0, 64, 0.1)
        with pytest.raises(UsageError):
            hard.solve_moment_lp(2, 16.0, 8, 0.1)
        with pytest.raises(UsageError):
            hard.solve_moment_lp(2, 16.0, 64, 1.5)


class TestHardPair:
    def test_rounding(self):
        np.testing.assert_array_equal(hard.round_multiplicities([1.5, 1.5, 1.0], 4), [2, 1, 1])
        with pytest.raises(UsageError):
            hard.round_multiplicities([1.0, 1.0], 3)

    def test_build(self, rng):
        pair = hard.build_hard_pair(1, 16.0, 64, 0.1, rng, seed=5)
        assert pair.N.sum() == 64 and pair.N_prime.sum() == 64
        assert pair.moment_mismatch()[0] == 0
        matrix = pair.rotated()
        np.testing.assert_allclose(matrix, matrix.T, atol=1e-10)
        np.testing.assert_allclose(np.linalg.eigvalsh(matrix), np.sort(pair.diagonal), rtol=1e-9)
        oracle = pair.oracle(prime=True)
        oracle.query(np.ones(64))
        assert oracle.query_count == 1

    def test_save_and_load(self, rng, tmp_path):
        pair = hard.build_hard_pair(1, 16.0, 64, 0.1, rng, seed=5)
        path = tmp_path / "pair.json"
        hard.save_hard_pair(pair, path)
        loaded = hard.load_hard_pair(path)
        np.testing.assert_array_equal(loaded.N, pair.N)
        np.testing.assert_array_equal(loaded.N_prime, pair.N_prime)
        assert loaded.trace_gap == pytest.approx(pair.trace_gap)
        np.testing.assert_allclose(loaded.rotation @ loaded.rotation.T, np.eye(64), atol=1e-10)
        assert hard.load_hard_pair(path, rotate=False).rotation is None


class TestTranscripts:
    def test_gram_entries(self):
        oracle = make_matvec_oracle(np.diag([2.0, 3.0]))
        gram = hard.krylov_transcript(oracle, np.array([1.0, 1.0]), 3)
        np.testing.assert_allclose(gram[:, 0, 0], [2.0, 5.0, 13.0, 35.0])
        assert oracle.query_count == 2

    def test_gram_summary_length(self):
        gram = np.zeros((4, 3, 3))
        assert hard.gram_summary(gram).shape == (4 * 6,)

    def test_single_sample_distinguisher(self):
        assert hard.single_sample_distinguisher(np.array([1.0, 1.0]), 2.0, 10.0) == "A"
        assert hard.single_sample_distinguisher(np.array([3.0, 0.0]), 2.0, 10.0) == "B"
        with pytest.raises(UsageError):
            hard.single_sample_distinguisher(np.ones(2), 1.0, 1.0)

    def test_distinguisher_separates_far_traces(self):
        d = 16
        pair = hard.HardPair(
            K=1, kappa=100.0, d=d, c1=0.1, nodes=np.array([1.0, 100.0]),
            x=np.array([d, 0.0]), x_prime=np.array([0.0, d]), lp_value=0.0, minimax_error=0.0,
            N=np.array([d, 0]), N_prime=np.array([0, d]),
        )
        result = hard.distinguisher_accuracy(pair, 400, seed=8)
        assert result["accuracy"] >= 0.9
        assert result["trace_A"] == pytest.approx(16.0)


class TestGOECoupling:
    def test_identical_blocks_always_couple(self, rng):
        result = hard.goe_coupling_experiment(2, [(10, 10), (12, 12)], [0.0, 0.0], 50, rng)
        assert result["success_rate"] == 1.0

    def test_arguments(self, rng):
        with pytest.raises(UsageError):
            hard.goe_coupling_experiment(3, [(4, 10)], [0.0], 5, rng)
        with pytest.raises(UsageError):
            hard.goe_coupling_experiment(2, [(10, 10)], [0.0, 1.0], 5, rng)

    def test_classifier_advantage_range(self, rng):
        result = hard.goe_classifier_advantage(2, 50, 200, rng)
        assert 0.0 <= result["accuracy"] <= 1.0
        assert result["advantage"] == pytest.approx(result["accuracy"] - 0.5)
