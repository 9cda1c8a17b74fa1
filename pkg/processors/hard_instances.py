"""
Hard instances processor - Wishart and GOE ensembles, the inverse-trace
reduction, the Chebyshev-duality moment LP and the moment-matched diagonal
pair built from it.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import linalg, stats

from config import settings
from errors import ContractViolation, InfeasibleProblem, NumericalError, UsageError
from models import HardPairRecord, TwoSampleResult, WishartNormalization
from processors.chebyshev_approx import extrema_nodes, finite_minimax
from processors.query_oracle import MatVecOracle, make_matvec_oracle
from processors.two_sample import energy_test, standardize_pair, wilson_interval
from utils.file_utils import load_json, write_json_atomic
from utils.parallel import map_trials

logger = logging.getLogger(__name__)


# Ensembles

@dataclass
class WishartSample:
    matrix: np.ndarray
    normalization: WishartNormalization
    rows: int
    cols: int


def _dims(dims: Union[int, Tuple[int, int]]) -> Tuple[int, int]:
    rows, cols = (dims, dims) if isinstance(dims, int) else (int(dims[0]), int(dims[1]))
    if rows < 1 or cols < 1:
        raise UsageError(f"Wishart dimensions must be positive, got {dims}")
    return rows, cols


def sample_wishart(
    dims: Union[int, Tuple[int, int]],
    normalization: WishartNormalization,
    rng: np.random.Generator,
) -> WishartSample:
    """
    W = XXᵀ with X of shape (rows, cols).

    unit-over-d: entries N(0, 1/cols), so E[tr W] = rows.
    standard: entries N(0, 1), so E[W_ii] = cols.
    """
    rows, cols = _dims(dims)
    normalization = WishartNormalization(normalization)
    X = rng.standard_normal((rows, cols))
    if normalization == WishartNormalization.UNIT:
        X /= math.sqrt(cols)
    return WishartSample(X @ X.T, normalization, rows, cols)


def sample_goe(K: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric G with diagonal variance 1 and off-diagonal variance ½."""
    A = rng.standard_normal((K, K))
    return (A + A.T) / 2.0


def haar_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar orthogonal matrix: QR of a Gaussian matrix with R's diagonal made positive."""
    Z = rng.standard_normal((d, d))
    q, r = linalg.qr(Z)
    return q * np.sign(np.diag(r))


# Smallest eigenvalue tail

def lambda_min_samples(d: int, trials: int, seed: int, chunk: int = 2000) -> np.ndarray:
    """λ_min of unit-over-d Wishart(d) draws, computed as σ_min(X)²."""
    chunks = math.ceil(trials / chunk) if trials > 0 else 0

    def run(i: int, rng: np.random.Generator) -> np.ndarray:
        size = min(chunk, trials - i * chunk)
        X = rng.standard_normal((size, d, d)) / math.sqrt(d)
        return np.linalg.svd(X, compute_uv=False)[:, -1] ** 2

    parts = map_trials(run, chunks, seed, path=(d,))
    return np.concatenate(parts) if parts else np.empty(0)


def edelman_tail(x: float) -> float:
    """Limit law Pr{d·σ_min² <= x} = 1 - exp(-x/2 - √x)."""
    return 1.0 - math.exp(-x / 2 - math.sqrt(x))


def smallest_eig_tail(d: int, x_grid: Sequence[float], trials: int, seed: int) -> List[Dict[str, float]]:
    """
    Monte-Carlo Pr{λ_min(W) <= x/d²} with Wilson intervals.

    Returns:
        One row per x: x, count, trials, estimate, ci_low, ci_high,
        ratio (estimate/√x), edelman. Empty when trials = 0.
    """
    if d < 2:
        raise UsageError(f"smallest_eig_tail needs d >= 2, got {d}")
    if any(not 0 < x <= 1 for x in x_grid):
        raise UsageError(f"x grid must lie in (0, 1], got {list(x_grid)}")
    if trials <= 0:
        return []
    lam = lambda_min_samples(d, trials, seed)
    rows = []
    for x in sorted(x_grid):
        count = int(np.sum(lam <= x / d ** 2))
        low, high = wilson_interval(count, trials)
        estimate = count / trials
        rows.append({
            "d": d,
            "x": x,
            "count": count,
            "trials": trials,
            "estimate": estimate,
            "ci_low": low,
            "ci_high": high,
            "ratio": estimate / math.sqrt(x),
            "edelman": edelman_tail(x),
        })
    logger.info(f"smallest_eig_tail: d={d}, {trials} trials, {len(rows)} grid points")
    return rows


def tail_is_monotone(rows: Sequence[Dict[str, float]]) -> bool:
    estimates = [r["estimate"] for r in sorted(rows, key=lambda r: r["x"])]
    return all(a <= b for a, b in zip(estimates, estimates[1:]))


# Inverse trace

def inverse_trace_estimator(
    sample_source: Union[np.ndarray, Callable[[int], np.ndarray]],
    m: int,
) -> float:
    """
    Mean of ‖Z_i‖² over m i.i.d. samples.

    Args:
        sample_source: Either an (m', d) array with m' >= m, or a callable
            returning an (m, d) array of samples
        m: Number of samples
    """
    if m < 1:
        raise UsageError(f"inverse_trace_estimator needs m >= 1, got {m}")
    samples = np.asarray(sample_source(m) if callable(sample_source) else sample_source, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < m:
        raise UsageError(f"Need at least {m} samples as rows, got shape {samples.shape}")
    return float(np.mean(np.sum(samples[:m] ** 2, axis=1)))


def squared_norm_variance(sigma: np.ndarray, draws: int, rng: np.random.Generator) -> Dict[str, float]:
    """
    Sample variance of ‖Z‖² for Z ~ N(0, Σ) against 2‖Σ‖²_HS, with the
    standard error of the sample variance.
    """
    sigma = np.asarray(sigma, dtype=float)
    factor = linalg.cholesky(sigma, lower=True)
    Z = rng.standard_normal((draws, sigma.shape[0])) @ factor.T
    norms = np.sum(Z ** 2, axis=1)
    centered = norms - norms.mean()
    variance = float(np.mean(centered ** 2))
    fourth = float(np.mean(centered ** 4))
    std_error = math.sqrt(max(fourth - variance ** 2, 0.0) / draws)
    expected = 2.0 * float(np.sum(sigma * sigma))
    return {
        "variance": variance,
        "expected": expected,
        "std_error": std_error,
        "z_score": (variance - expected) / std_error if std_error > 0 else 0.0,
    }


def posterior_minorization_check(n: int, d: int, trials: int, rng: np.random.Generator) -> Dict[str, object]:
    """
    λ_min of [[Y₁Y₁ᵀ, Y₁Y₂ᵀ], [Y₂Y₁ᵀ, Y₂Y₂ᵀ + W̃]] against λ_min(W̃) for
    random Gaussian Y₁, Y₂ and a random PSD W̃ (a Gram matrix of random rank).

    Raises:
        NumericalError: On any violation beyond 1e-10
    """
    if not 0 < n < d <= 12:
        raise UsageError(f"posterior_minorization_check needs 0 < n < d <= 12, got n={n}, d={d}")
    worst = -math.inf
    for t in range(trials):
        Y1 = rng.standard_normal((n, n))
        Y2 = rng.standard_normal((d - n, n))
        rank = int(rng.integers(1, 2 * (d - n) + 1))
        G = rng.standard_normal((d - n, rank))
        W_tilde = G @ G.T / rank
        block = minorization_block(Y1, Y2, W_tilde)
        gap = float(np.linalg.eigvalsh(block)[0] - np.linalg.eigvalsh(W_tilde)[0])
        worst = max(worst, gap)
        if gap > 1e-10:
            raise NumericalError(
                f"Minorization violated on trial {t}: λ_min(block) - λ_min(W̃) = {gap:.3e}",
                {"trial": t, "n": n, "d": d, "gap": gap},
            )
    return {"n": n, "d": d, "trials": trials, "violations": 0, "max_gap": worst if trials else None}


def minorization_block(Y1: np.ndarray, Y2: np.ndarray, W_tilde: np.ndarray) -> np.ndarray:
    return np.block([[Y1 @ Y1.T, Y1 @ Y2.T], [Y2 @ Y1.T, Y2 @ Y2.T + W_tilde]])


def _orthonormal_columns(M: np.ndarray) -> np.ndarray:
    q, _ = linalg.qr(M, mode="economic")
    return q


def _complete_block(Q: Optional[np.ndarray], M: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal basis of M's component orthogonal to Q, padded with random directions."""
    d, width = M.shape
    for _ in range(2):
        if Q is not None:
            M = M - Q @ (Q.T @ M)
    q, r = linalg.qr(M, mode="economic")
    keep = np.abs(np.diag(r)) > 1e-10 * max(1.0, float(np.max(np.abs(r))) if r.size else 1.0)
    q = q[:, keep]
    while q.shape[1] < width:
        extra = rng.standard_normal((d, width - q.shape[1]))
        basis = q if Q is None else np.hstack([Q, q])
        for _ in range(2):
            extra = extra - basis @ (basis.T @ extra)
        q = np.hstack([q, _orthonormal_columns(extra)])
    return q[:, :width]


def _rayleigh_ritz_inverse_trace(Q: np.ndarray, responses: np.ndarray, d: int) -> float:
    B = Q.T @ responses
    B = 0.5 * (B + B.T)
    eigs = np.linalg.eigvalsh(B)
    if eigs[0] <= 0:
        return math.inf
    return d / Q.shape[1] * float(np.sum(1.0 / eigs))


def hutchinson_strategy(oracle: MatVecOracle, n: int, rng: np.random.Generator) -> float:
    """Random orthonormal block of width n, then (d/n)·tr((QᵀWQ)^{-1})."""
    d = oracle.dimension
    Q = _orthonormal_columns(rng.standard_normal((d, n)))
    return _rayleigh_ritz_inverse_trace(Q, oracle.query(Q), d)


def block_krylov_strategy(oracle: MatVecOracle, n: int, rng: np.random.Generator, block: int = 4) -> float:
    """Block Lanczos basis from a random start, same Rayleigh-Ritz estimate."""
    d = oracle.dimension
    current = _orthonormal_columns(rng.standard_normal((d, min(block, n))))
    bases, responses = [], []
    used = 0
    while used < n:
        current = current[:, : n - used]
        response = oracle.query(current)
        bases.append(current)
        responses.append(response)
        used += current.shape[1]
        if used < n:
            current = _complete_block(np.hstack(bases), response, rng)
    return _rayleigh_ritz_inverse_trace(np.hstack(bases), np.hstack(responses), d)


INVERSE_TRACE_STRATEGIES = {
    "hutchinson": hutchinson_strategy,
    "block-krylov": block_krylov_strategy,
}


def inverse_trace_query_experiment(
    d: int,
    strategy: str,
    n_grid: Sequence[int],
    trials: int,
    seed: int,
) -> List[Dict[str, float]]:
    """
    Success rate of trhat ∈ [½ tr(W^{-1}), 2 tr(W^{-1})] per query count n,
    plus the fraction of draws with tr(W^{-1}) <= C'·d².
    """
    if strategy not in INVERSE_TRACE_STRATEGIES:
        raise UsageError(f"Unknown strategy '{strategy}'; expected one of {sorted(INVERSE_TRACE_STRATEGIES)}")
    if any(not 1 <= n <= d for n in n_grid):
        raise UsageError(f"Query counts must lie in [1, {d}], got {list(n_grid)}")
    run_strategy = INVERSE_TRACE_STRATEGIES[strategy]
    c_prime = settings.c_prime

    def run(i: int, rng: np.random.Generator) -> Tuple[List[bool], bool]:
        W = sample_wishart(d, WishartNormalization.UNIT, rng).matrix
        true_trace = float(np.sum(1.0 / np.linalg.eigvalsh(W)))
        hits = []
        for n in n_grid:
            oracle = make_matvec_oracle(W)
            estimate = run_strategy(oracle, n, rng)
            if oracle.query_count != n:
                raise ContractViolation(f"{strategy} used {oracle.query_count} queries, expected {n}")
            hits.append(0.5 * true_trace <= estimate <= 2.0 * true_trace)
        return hits, true_trace <= c_prime * d * d

    results = map_trials(run, trials, seed, path=(d,))
    bounded = sum(r[1] for r in results)
    rows = []
    for col, n in enumerate(n_grid):
        successes = sum(r[0][col] for r in results)
        low, high = wilson_interval(successes, trials)
        rows.append({
            "d": d,
            "strategy": strategy,
            "n": n,
            "trials": trials,
            "success_rate": successes / trials if trials else 0.0,
            "ci_low": low,
            "ci_high": high,
            "c_prime": c_prime,
            "trace_bounded_fraction": bounded / trials if trials else 0.0,
        })
    logger.info(f"inverse_trace_query_experiment: d={d}, {strategy}, {trials} trials")
    return rows


# Moment LP

def _simplex_maximize(A: np.ndarray, b: np.ndarray, c: np.ndarray, tol: float = 1e-11) -> Tuple[np.ndarray, float]:
    """
    Dense two-phase simplex with Bland's rule for max cᵀx, Ax = b, x >= 0.

    Raises:
        InfeasibleProblem: If phase one ends with positive infeasibility,
            or the problem is unbounded
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase one tableau: [A | I | b], artificials n..n+m-1
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))

    def pivot(row: int, col: int) -> None:
        T[row] /= T[row, col]
        for r in range(T.shape[0]):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col

    def run(costs: np.ndarray, allowed: int) -> None:
        for _ in range(10_000):
            reduced = costs[:allowed] - costs[basis] @ T[:, :allowed]
            entering = next((j for j in range(allowed) if reduced[j] > tol), None)
            if entering is None:
                return
            column = T[:, entering]
            ratios = [
                (T[r, -1] / column[r], basis[r], r) for r in range(m) if column[r] > tol
            ]
            if not ratios:
                raise InfeasibleProblem("Moment LP is unbounded")
            best = min(r[0] for r in ratios)
            _, _, row = min((r for r in ratios if r[0] <= best + tol), key=lambda r: r[1])
            pivot(row, entering)
        raise NumericalError("Simplex did not terminate in 10000 pivots")

    phase_one = np.concatenate([np.zeros(n), -np.ones(m)])
    run(phase_one, n + m)
    if float(np.sum(T[[r for r in range(m) if basis[r] >= n], -1])) > 1e-9 * max(1.0, float(b.max())):
        raise InfeasibleProblem("Moment LP is infeasible", {"rows": m, "cols": n})

    # drive zero-level artificials out; rows with nothing to pivot on are redundant
    redundant = []
    for r in range(m):
        if basis[r] >= n:
            col = next((j for j in range(n) if abs(T[r, j]) > 1e-9), None)
            if col is None:
                redundant.append(r)
            else:
                pivot(r, col)
    keep = [r for r in range(m) if r not in redundant]
    T = np.hstack([T[keep][:, :n], T[keep][:, -1:]])
    basis = [basis[r] for r in keep]
    m = len(keep)

    run(np.asarray(c, dtype=float), n)
    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    return x, float(c @ x)


def _moment_system(nodes: np.ndarray, K: int, d: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows Σx = d, Σx' = d and Σ(x - x')·T_j(t_i) = 0 for j = 1..K."""
    size = len(nodes)
    lo, hi = float(nodes.min()), float(nodes.max())
    t = 2 * (nodes - lo) / (hi - lo) - 1
    V = C.chebvander(t, K)[:, 1:].T
    A = np.zeros((K + 2, 2 * size))
    A[0, :size] = 1.0
    A[1, size:] = 1.0
    A[2:, :size] = V
    A[2:, size:] = -V
    b = np.zeros(K + 2)
    b[:2] = d
    c = np.concatenate([1.0 / nodes, -1.0 / nodes])
    return A, b, c


def moment_lp_optimum(K: int, kappa: float, d: int) -> Tuple[np.ndarray, np.ndarray, float, float, np.ndarray]:
    """
    Raw LP optimum (x, x', value), the minimax error E and the nodes.

    Raises:
        InfeasibleProblem: If the duality gap to 2d·E exceeds 1e-6 relative
    """
    nodes = extrema_nodes(K, kappa).as_array()
    A, b, c = _moment_system(nodes, K, d)
    solution, value = _simplex_maximize(A, b, c)
    size = len(nodes)
    E, _ = finite_minimax(extrema_nodes(K, kappa), K)
    dual = 2 * d * E
    gap = abs(value - dual) / max(dual, 1e-300)
    if gap > 1e-6:
        raise InfeasibleProblem(
            f"Duality gap {gap:.3e} exceeds 1e-6 (primal {value:.10g}, dual {dual:.10g})",
            {"K": K, "kappa": kappa, "d": d, "primal": value, "dual": dual},
        )
    return solution[:size], solution[size:], value, E, nodes


def brute_force_lp(K: int, kappa: float, d: int) -> float:
    """Best objective over all basic feasible solutions; for small K only."""
    if K > 2:
        raise UsageError(f"brute_force_lp enumerates bases only for K <= 2, got {K}")
    nodes = extrema_nodes(K, kappa).as_array()
    A, b, c = _moment_system(nodes, K, d)
    m, n = A.shape
    best = -math.inf
    for columns in itertools.combinations(range(n), m):
        sub = A[:, columns]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        values = np.linalg.solve(sub, b)
        if np.all(values >= -1e-9):
            x = np.zeros(n)
            x[list(columns)] = values
            best = max(best, float(c @ x))
    return best


@dataclass
class HardPair:
    """Moment-matched pair D, D' and, once built, their rotated versions Λ, Λ'."""
    K: int
    kappa: float
    d: int
    c1: float
    nodes: np.ndarray
    x: np.ndarray
    x_prime: np.ndarray
    lp_value: float
    minimax_error: float
    N: Optional[np.ndarray] = None
    N_prime: Optional[np.ndarray] = None
    rotation: Optional[np.ndarray] = None
    seed: int = 0

    @property
    def diagonal(self) -> np.ndarray:
        return np.repeat(self.nodes, self.N)

    @property
    def diagonal_prime(self) -> np.ndarray:
        return np.repeat(self.nodes, self.N_prime)

    def rotated(self, prime: bool = False) -> np.ndarray:
        diag = self.diagonal_prime if prime else self.diagonal
        if self.rotation is None:
            return np.diag(diag)
        U = self.rotation
        return U.T @ (diag[:, None] * U)

    def oracle(self, prime: bool = False) -> MatVecOracle:
        """Mat-vec oracle of Λ (or Λ'); the matrix is SPD by construction."""
        matrix = self.rotated(prime)
        return MatVecOracle(lambda v: matrix @ v, self.d)

    def inverse_trace(self, prime: bool = False) -> float:
        counts = self.N_prime if prime else self.N
        return float(np.sum(counts / self.nodes))

    @property
    def trace_gap(self) -> float:
        return self.inverse_trace() - self.inverse_trace(prime=True)

    def moment_mismatch(self) -> np.ndarray:
        """|ΣN_iλ_i^j - ΣN'_iλ_i^j| / κ^j for j = 0..K."""
        scaled = self.nodes / self.kappa
        diff = (self.N - self.N_prime).astype(float)
        return np.array([abs(float(np.sum(diff * scaled ** j))) for j in range(self.K + 1)])

    def to_record(self) -> HardPairRecord:
        return HardPairRecord(
            K=self.K, kappa=self.kappa, d=self.d, c1=self.c1, seed=self.seed,
            nodes=self.nodes.tolist(), x=self.x.tolist(), x_prime=self.x_prime.tolist(),
            N=[int(v) for v in self.N], N_prime=[int(v) for v in self.N_prime],
            lp_value=self.lp_value, minimax_error=self.minimax_error, trace_gap=self.trace_gap,
        )

    @classmethod
    def from_record(cls, record: HardPairRecord, rotate: bool = True) -> "HardPair":
        pair = cls(
            K=record.K, kappa=record.kappa, d=record.d, c1=record.c1,
            nodes=np.array(record.nodes), x=np.array(record.x), x_prime=np.array(record.x_prime),
            lp_value=record.lp_value, minimax_error=record.minimax_error,
            N=np.array(record.N), N_prime=np.array(record.N_prime), seed=record.seed,
        )
        if rotate:
            pair.rotation = haar_rotation(pair.d, np.random.default_rng(record.seed))
        return pair


def default_c1(kappa: float, d: int) -> float:
    """1/(κ^{3/2}·log⁴ d)."""
    return 1.0 / (kappa ** 1.5 * math.log(d) ** 4)


def lp_threshold(kappa: float, d: int) -> int:
    """Moment depth max(1, ⌊c₀·√κ·log d⌋) used for the desk-scale dichotomy."""
    return max(1, int(math.floor(settings.c0 * math.sqrt(kappa) * math.log(d))))


def solve_moment_lp(K: int, kappa: float, d: int, c1: float) -> HardPair:
    """
    Solve the moment LP and strengthen its solution.

    The raw optimum (value 2d·E) is mixed half-and-half with the uniform
    vector d/(K+2), then recombined as x̃ = (1+c₁)/2·x + (1-c₁)/2·x' and
    symmetrically for x̃'. The result satisfies min x̃ >= d/(2(K+2)) and
    |x̃ - x̃'|/x̃ <= 2c₁/(1-c₁), with objective c₁·d·E.

    Raises:
        UsageError: If K < 1, κ <= 1, d < 4(K+2) or c₁ outside (0, 1)
        InfeasibleProblem: On infeasibility or a duality gap above 1e-6
    """
    if K < 1 or kappa <= 1 or d < 4 * (K + 2) or not 0 < c1 < 1:
        raise UsageError(f"solve_moment_lp needs K >= 1, kappa > 1, d >= 4(K+2), 0 < c1 < 1; got {K}, {kappa}, {d}, {c1}")
    x, x_prime, value, E, nodes = moment_lp_optimum(K, kappa, d)

    uniform = d / (K + 2)
    x = 0.5 * (x + uniform)
    x_prime = 0.5 * (x_prime + uniform)
    x_tilde = (1 + c1) / 2 * x + (1 - c1) / 2 * x_prime
    x_tilde_prime = (1 + c1) / 2 * x_prime + (1 - c1) / 2 * x

    strengthened = float(np.sum((x_tilde - x_tilde_prime) / nodes))
    if strengthened < c1 * d * E * (1 - 1e-9):
        raise NumericalError(
            f"Strengthened objective {strengthened:.6g} below c1·d·E = {c1 * d * E:.6g}",
            {"K": K, "kappa": kappa, "d": d, "c1": c1},
        )
    logger.info(f"solve_moment_lp: K={K}, kappa={kappa}, d={d}, E={E:.4e}, value={value:.6g}")
    return HardPair(K=K, kappa=float(kappa), d=d, c1=c1, nodes=nodes, x=x_tilde, x_prime=x_tilde_prime,
                    lp_value=value, minimax_error=E)


def round_multiplicities(x: Sequence[float], d: int) -> np.ndarray:
    """
    Round to integers with exact sum d: floors, then promote the largest
    fractional parts (lower index first on ties).
    """
    x = np.asarray(x, dtype=float)
    if abs(float(x.sum()) - d) > 1e-6:
        raise UsageError(f"Multiplicities sum to {x.sum():.9g}, expected {d}")
    floors = np.floor(x + 1e-12).astype(int)
    remainder = d - int(floors.sum())
    fractions = x - floors
    order = sorted(range(len(x)), key=lambda i: (-round(fractions[i], 12), i))
    for i in order[:remainder]:
        floors[i] += 1
    return floors


def build_hard_pair(K: int, kappa: float, d: int, c1: float, rng: np.random.Generator,
                    seed: int = 0, rotate: bool = True) -> HardPair:
    """Round the strengthened LP solution and rotate both diagonals by one Haar U."""
    pair = solve_moment_lp(K, kappa, d, c1)
    pair.N = round_multiplicities(pair.x, d)
    pair.N_prime = round_multiplicities(pair.x_prime, d)
    pair.seed = seed
    if rotate:
        pair.rotation = haar_rotation(d, rng)
    logger.info(f"build_hard_pair: trace gap {pair.trace_gap:.4f}")
    return pair


def save_hard_pair(pair: HardPair, path: Path) -> None:
    write_json_atomic(path, pair.to_record().model_dump(mode="json"))


def load_hard_pair(path: Path, rotate: bool = True) -> HardPair:
    """Read a pair saved by save_hard_pair or written as a run artifact (meta + result)."""
    document = load_json(Path(path))
    record = HardPairRecord.model_validate(document.get("result", document))
    return HardPair.from_record(record, rotate=rotate)


# Transcripts and distinguishers

def krylov_transcript(
    operator: Union[np.ndarray, MatVecOracle],
    seeds: np.ndarray,
    depth: int,
) -> np.ndarray:
    """
    Gram tensor G[j, k, ℓ] = ⟨z_k, Λ^j z_ℓ⟩ for j = 0..depth.

    Products are chained as P_j = Λ·P_{j-1}; G[j] pairs P_{⌊j/2⌋} with
    P_{⌈j/2⌉} and is symmetrized.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[0] == 1 and seeds.shape[1] > 1:
        seeds = seeds.T
    apply = operator.query if isinstance(operator, MatVecOracle) else (lambda v: operator @ v)
    powers = [seeds]
    for _ in range((depth + 1) // 2):
        powers.append(apply(powers[-1]))
    gram = np.empty((depth + 1, seeds.shape[1], seeds.shape[1]))
    for j in range(depth + 1):
        g = powers[j // 2].T @ powers[(j + 1) // 2]
        gram[j] = 0.5 * (g + g.T)
    return gram


def gram_summary(gram: np.ndarray) -> np.ndarray:
    """Upper triangles of every slice, flattened."""
    iu = np.triu_indices(gram.shape[1])
    return np.concatenate([g[iu] for g in gram])


def transcript_dichotomy_test(
    pair: HardPair,
    width: int,
    depth: int,
    transcripts: int,
    seed: int,
    permutations: Optional[int] = None,
) -> TwoSampleResult:
    """Energy test on Gram tensors of Λ versus Λ' transcripts from fresh Gaussian seeds."""
    matrices = [pair.rotated(), pair.rotated(prime=True)]

    def run(i: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        seeds = rng.standard_normal((pair.d, width))
        first = gram_summary(krylov_transcript(matrices[0], seeds, depth))
        seeds = rng.standard_normal((pair.d, width))
        second = gram_summary(krylov_transcript(matrices[1], seeds, depth))
        return first, second

    results = map_trials(run, transcripts, seed, path=(1,))
    A, B = standardize_pair(np.array([r[0] for r in results]), np.array([r[1] for r in results]))
    return energy_test(A, B, permutations, np.random.default_rng(seed))


def single_sample_distinguisher(x: np.ndarray, trA: float, trB: float) -> str:
    """'A' iff ‖x‖² is at least as close to trA as to trB."""
    if trA == trB:
        raise UsageError("Distinguisher needs trA != trB")
    norm2 = float(np.dot(x, x))
    return "A" if abs(norm2 - trA) <= abs(norm2 - trB) else "B"


def distinguisher_accuracy(pair: HardPair, trials: int, seed: int) -> Dict[str, float]:
    """
    One exact sample X ~ N(0, Λ^{-1}) or N(0, Λ'^{-1}) per trial, label drawn
    uniformly; X = Uᵀ D^{-1/2} g.
    """
    trA, trB = pair.inverse_trace(), pair.inverse_trace(prime=True)
    diagonals = [pair.diagonal, pair.diagonal_prime]

    def run(i: int, rng: np.random.Generator) -> bool:
        label = int(rng.integers(0, 2))
        g = rng.standard_normal(pair.d) / np.sqrt(diagonals[label])
        x = pair.rotation.T @ g if pair.rotation is not None else g
        return single_sample_distinguisher(x, trA, trB) == ("A" if label == 0 else "B")

    hits = sum(map_trials(run, trials, seed, path=(2,)))
    low, high = wilson_interval(hits, trials)
    return {"trials": trials, "accuracy": hits / trials if trials else 0.0, "ci_low": low, "ci_high": high,
            "trace_A": trA, "trace_B": trB}


# GOE coupling

def _maximal_coupling(mu_p, sd_p, mu_q, sd_q, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw (X, Y) with X ~ N(mu_p, sd_p²), Y ~ N(mu_q, sd_q²) and X = Y with
    probability 1 - TV, elementwise over broadcast parameters.
    """
    mu_p, sd_p, mu_q, sd_q = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mu_p, sd_p, mu_q, sd_q)))
    X = rng.normal(mu_p, sd_p)
    coupled = rng.random(X.shape) * stats.norm.pdf(X, mu_p, sd_p) <= stats.norm.pdf(X, mu_q, sd_q)
    Y = X.copy()
    pending = ~coupled
    for _ in range(10_000):
        if not pending.any():
            break
        cand = rng.normal(mu_q[pending], sd_q[pending])
        accept = rng.random(cand.shape) * stats.norm.pdf(cand, mu_q[pending], sd_q[pending]) > \
            stats.norm.pdf(cand, mu_p[pending], sd_p[pending])
        idx = np.flatnonzero(pending)
        Y.flat[idx[accept]] = cand[accept]
        pending.flat[idx[accept]] = False
    if pending.any():
        raise ContractViolation("Residual sampling of the maximal coupling did not finish")
    return X, Y


def goe_coupling_experiment(
    K: int,
    pairs: Sequence[Tuple[int, int]],
    shifts: Sequence[float],
    trials: int,
    rng: np.random.Generator,
) -> Dict[str, float]:
    """
    Entrywise maximal coupling of N_i·I + √(2N_i)·G against
    (N'_i + s_i)·I + √(2N'_i)·G' for every block i.

    A trial succeeds when every entry of every block coincides.
    """
    if any(min(n, m) < K * K for n, m in pairs):
        raise UsageError(f"goe_coupling_experiment needs N_i >= K² = {K * K}")
    if len(pairs) != len(shifts):
        raise UsageError("pairs and shifts must have equal length")
    iu = np.triu_indices(K)
    on_diag = iu[0] == iu[1]
    successes = 0
    for _ in range(trials):
        ok = True
        for (n, n_prime), shift in zip(pairs, shifts):
            mu_p = np.where(on_diag, n, 0.0)
            mu_q = np.where(on_diag, n_prime + shift, 0.0)
            sd_p = np.sqrt(np.where(on_diag, 2.0 * n, n))
            sd_q = np.sqrt(np.where(on_diag, 2.0 * n_prime, n_prime))
            X, Y = _maximal_coupling(mu_p, sd_p, mu_q, sd_q, rng)
            ok = ok and bool(np.all(X == Y))
        successes += int(ok)
    low, high = wilson_interval(successes, trials)
    return {"K": K, "blocks": len(pairs), "trials": trials,
            "success_rate": successes / trials if trials else 1.0, "ci_low": low, "ci_high": high}


def _goe_surrogate_logpdf(W: np.ndarray, N: int) -> np.ndarray:
    K = W.shape[0]
    iu = np.triu_indices(K)
    entries = W[iu]
    diag = (iu[0] == iu[1])[:, None]
    mean = np.where(diag, float(N), 0.0)
    sd = np.sqrt(np.where(diag, 2.0 * N, float(N)))
    return np.sum(stats.norm.logpdf(entries, mean, sd), axis=0)


def goe_classifier_advantage(K: int, N: int, samples: int, rng: np.random.Generator) -> Dict[str, float]:
    """
    Bayes classifier between Wishart(K, N) and N·I + √(2N)·GOE using the
    exact log-likelihood ratio; advantage = accuracy - ½.
    """
    X = rng.standard_normal((samples, K, N))
    wishart_draws = np.einsum("skn,sln->kls", X, X)
    goe_draws = N * np.eye(K)[:, :, None] + math.sqrt(2 * N) * np.stack(
        [sample_goe(K, rng) for _ in range(samples)], axis=-1
    )

    def llr(W: np.ndarray) -> np.ndarray:
        wishart_log = np.full(W.shape[-1], -np.inf)
        pd = np.array([np.linalg.eigvalsh(W[:, :, s])[0] > 0 for s in range(W.shape[-1])])
        if pd.any():
            points = W[:, :, pd] if K > 1 else W[0, 0, pd]
            wishart_log[pd] = np.atleast_1d(stats.wishart.logpdf(points, df=N, scale=np.eye(K)))
        return wishart_log - _goe_surrogate_logpdf(W, N)

    correct = int(np.sum(llr(wishart_draws) > 0)) + int(np.sum(llr(goe_draws) <= 0))
    accuracy = correct / (2 * samples)
    return {"K": K, "N": N, "samples": samples, "accuracy": accuracy, "advantage": accuracy - 0.5}
