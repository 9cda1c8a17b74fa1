"""
Krylov reduction processor - runs adaptive deterministic algorithms in the
extended oracle model and simulates their transcripts from non-adaptive
block-Krylov data by composing rotations.

Transcripts are dicts keyed by (i, j), holding Λ^i v_j.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from errors import ContractViolation, UsageError
from models import IdentityResiduals, ReductionReport, TwoSampleResult
from processors.hard_instances import haar_rotation
from processors.query_oracle import MatVecOracle, enumeration_order, extended_index_set
from processors.two_sample import energy_test, standardize_pair
from utils.parallel import map_trials

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]
Transcript = Dict[Pair, np.ndarray]


def index_pairs(k: int) -> List[Pair]:
    """H_k in enumeration order; empty for k = 0."""
    return [] if k < 1 else list(extended_index_set(k))


def orthonormal_basis(vectors: Sequence[np.ndarray], dimension: int) -> np.ndarray:
    """Modified Gram-Schmidt with one reorthogonalization pass; drops dependent vectors."""
    basis: List[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=float)
        scale = float(np.linalg.norm(w))
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        norm = float(np.linalg.norm(w))
        if scale > 0 and norm > 1e-10 * scale:
            basis.append(w / norm)
    return np.array(basis).T if basis else np.zeros((dimension, 0))


def orthogonalized_direction(z: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    """
    Unit vector along the component of z orthogonal to span(basis).

    Raises:
        ContractViolation: If the residual norm is at most 1e-8·‖z‖
    """
    z = np.asarray(z, dtype=float)
    Q = orthonormal_basis(basis, z.shape[0])
    r = z.copy()
    for _ in range(2):
        for col in range(Q.shape[1]):
            r -= (Q[:, col] @ r) * Q[:, col]
    norm = float(np.linalg.norm(r))
    if norm <= 1e-8 * float(np.linalg.norm(z)):
        raise ContractViolation(
            f"Degenerate residual {norm:.3e} against a basis of {Q.shape[1]} vectors",
            {"residual": norm},
        )
    return r / norm


# Rotations

@dataclass
class Reflectors:
    """U = H(w_1)·H(w_2)·..., H(w) = I - 2wwᵀ."""
    vectors: List[np.ndarray] = field(default_factory=list)

    def apply(self, v: np.ndarray) -> np.ndarray:
        for w in reversed(self.vectors):
            v = v - 2.0 * np.outer(w, w @ v) if v.ndim == 2 else v - 2.0 * (w @ v) * w
        return v

    def apply_T(self, v: np.ndarray) -> np.ndarray:
        for w in self.vectors:
            v = v - 2.0 * np.outer(w, w @ v) if v.ndim == 2 else v - 2.0 * (w @ v) * w
        return v

    def matrix(self, dimension: int) -> np.ndarray:
        return self.apply(np.eye(dimension))


def _rotation_reflectors(fixed: Sequence[np.ndarray], y: np.ndarray, z: np.ndarray) -> Reflectors:
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    d = y.shape[0]
    if len(fixed) + 1 >= d:
        raise UsageError(f"build_rotation needs dim > |fixed| + 1, got d={d}, |fixed|={len(fixed)}")
    for name, v in (("y", y), ("z", z)):
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-8:
            raise UsageError(f"{name} must be a unit vector, norm = {np.linalg.norm(v):.12f}")
    Q = orthonormal_basis(fixed, d)
    for name, v in (("y", y), ("z", z)):
        if Q.shape[1]:
            worst = float(np.max(np.abs(Q.T @ v)))
            if worst > 1e-8:
                raise UsageError(f"{name} is not orthogonal to the fixed span: max inner product {worst:.3e}")

    diff = y - z
    gap = float(np.linalg.norm(diff))
    if gap <= 1e-14:
        return Reflectors()
    first = diff / gap

    # second reflection along the most available coordinate direction, for det = +1
    B = orthonormal_basis(list(fixed) + [y, z], d)
    if B.shape[1] >= d:
        return Reflectors([first])
    available = 1.0 - np.sum(B * B, axis=1)
    i = int(np.argmax(available))
    u = -B @ B[i]
    u[i] += 1.0
    u -= B @ (B.T @ u)
    return Reflectors([first, u / np.linalg.norm(u)])


def build_rotation(fixed: Sequence[np.ndarray], y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    Orthogonal U with Uᵀx = x for every fixed x and Uᵀy = z.

    U is identity on span(fixed) and a pair of Householder reflections on
    the complement (a single one when no room is left).

    Raises:
        UsageError: If y, z are not unit, not orthogonal to span(fixed),
            or d <= |fixed| + 1
    """
    return _rotation_reflectors(fixed, y, z).matrix(np.asarray(y).shape[0])


# Adaptive algorithms

RawQuery = Callable[[int, Transcript, int], np.ndarray]


class AdaptiveAlgorithm:
    """
    Deterministic query functions v_1, v_2(·), ..., v_K(·).

    The raw function sees the step k, the transcript over H_{k-1} and the
    dimension; its output is projected off the span of the transcript and
    normalized.
    """

    def __init__(self, name: str, raw: RawQuery):
        self.name = name
        self._raw = raw

    def query(self, k: int, transcript: Transcript, dimension: int) -> np.ndarray:
        inputs = [transcript[p] for p in index_pairs(k - 1)]
        return orthogonalized_direction(self._raw(k, transcript, dimension), inputs)


def _fixed_direction(k: int, dimension: int) -> np.ndarray:
    return np.random.default_rng([0, dimension, k]).standard_normal(dimension)


def _fresh(k: int, transcript: Transcript, dimension: int) -> np.ndarray:
    return _fixed_direction(k, dimension)


def _power(k: int, transcript: Transcript, dimension: int) -> np.ndarray:
    if k == 1:
        e = np.zeros(dimension)
        e[0] = 1.0
        return e
    r = transcript[(k - 1, 1)]
    return r * np.abs(r)


def _hybrid(k: int, transcript: Transcript, dimension: int) -> np.ndarray:
    fresh = _fixed_direction(k, dimension)
    power = _power(k, transcript, dimension)
    return fresh / np.linalg.norm(fresh) + power / np.linalg.norm(power)


ALGORITHMS: Dict[str, AdaptiveAlgorithm] = {
    "fresh": AdaptiveAlgorithm("fresh", _fresh),
    "power": AdaptiveAlgorithm("power", _power),
    "hybrid": AdaptiveAlgorithm("hybrid", _hybrid),
}


def get_algorithm(name: str) -> AdaptiveAlgorithm:
    if name not in ALGORITHMS:
        raise UsageError(f"Unknown algorithm '{name}'; expected one of {sorted(ALGORITHMS)}")
    return ALGORITHMS[name]


def _as_oracle(operator: Union[np.ndarray, MatVecOracle]) -> MatVecOracle:
    if isinstance(operator, MatVecOracle):
        return operator
    matrix = np.asarray(operator, dtype=float)
    return MatVecOracle(lambda v: matrix @ v, matrix.shape[0])


def adaptive_sequence(alg: AdaptiveAlgorithm, operator: Union[np.ndarray, MatVecOracle], m: int) -> Transcript:
    """The first m vectors v_1, Λv_1, v_2, Λ²v_1, ... of an adaptive run."""
    oracle = _as_oracle(operator)
    d = oracle.dimension
    transcript: Transcript = {}
    for i, j in enumeration_order(m):
        if i == 0:
            transcript[(0, j)] = alg.query(j, transcript, d)
        else:
            transcript[(i, j)] = oracle.query(transcript[(i - 1, j)])
    return transcript


def run_adaptive(alg: AdaptiveAlgorithm, operator: Union[np.ndarray, MatVecOracle], K: int) -> Transcript:
    """
    Ground-truth transcript {Λ^i v_j}_{H_K}.

    Raises:
        UsageError: If K² >= d
    """
    oracle = _as_oracle(operator)
    if K < 1 or K * K >= oracle.dimension:
        raise UsageError(f"run_adaptive needs 1 <= K and K² < d, got K={K}, d={oracle.dimension}")
    return adaptive_sequence(alg, oracle, len(index_pairs(K)))


# Block-Krylov data and the simulation

class KrylovData:
    """
    {Λ^i z_j}_{H_K} behind an access log; each access is tagged with the
    simulation step that made it.
    """

    def __init__(self, vectors: Transcript, K: int):
        self._vectors = vectors
        self.K = K
        self.dimension = next(iter(vectors.values())).shape[0]
        self.accesses: List[Tuple[int, int, int]] = []

    @classmethod
    def generate(cls, operator: Union[np.ndarray, MatVecOracle], K: int, rng: np.random.Generator) -> "KrylovData":
        oracle = _as_oracle(operator)
        seeds = rng.standard_normal((oracle.dimension, K))
        vectors: Transcript = {}
        for i, j in index_pairs(K):
            vectors[(i, j)] = seeds[:, j - 1].copy() if i == 0 else oracle.query(vectors[(i - 1, j)])
        return cls(vectors, K)

    def get(self, i: int, j: int, step: int) -> np.ndarray:
        self.accesses.append((step, i, j))
        return self._vectors[(i, j)]

    def audit_passed(self) -> bool:
        """Every access at step k used i + j <= k."""
        return all(i + j <= step for step, i, j in self.accesses)


@dataclass
class SimState:
    data: KrylovData
    coefficients: List[Dict[Pair, float]] = field(default_factory=list)
    v_tilde: List[np.ndarray] = field(default_factory=list)
    v_bar: List[np.ndarray] = field(default_factory=list)
    rotations: List[Reflectors] = field(default_factory=list)
    rotated: bool = True
    _lam_v: Dict[Pair, np.ndarray] = field(default_factory=dict)

    def lam_v(self, i: int, j: int, step: int) -> np.ndarray:
        """Λ^i ṽ_j assembled from the Krylov data."""
        key = (i, j)
        if key not in self._lam_v:
            total = np.zeros(self.data.dimension)
            for (a, b), c in self.coefficients[j - 1].items():
                total += c * self.data.get(a + i, b, step)
            self._lam_v[key] = total
        return self._lam_v[key]

    def product_T(self, v: np.ndarray, upto: int) -> np.ndarray:
        """(Ũ_{1:upto})ᵀ v."""
        for rotation in self.rotations[:upto]:
            v = rotation.apply_T(v)
        return v

    def product(self, v: np.ndarray, upto: int) -> np.ndarray:
        """Ũ_{1:upto} v."""
        for rotation in reversed(self.rotations[:upto]):
            v = rotation.apply(v)
        return v


def _next_direction(state: SimState, k: int) -> None:
    """ṽ_k from z_k and {Λ^i z_j}_{H_{k-1}}, stored with its coefficients over the data."""
    data = state.data
    pairs = index_pairs(k - 1)
    z = data.get(0, k, k)
    if not pairs:
        norm = float(np.linalg.norm(z))
        state.coefficients.append({(0, k): 1.0 / norm})
        state.v_tilde.append(z / norm)
        return
    G = np.column_stack([data.get(i, j, k) for i, j in pairs])
    c1 = linalg.lstsq(G, z)[0]
    r = z - G @ c1
    c2 = linalg.lstsq(G, r)[0]
    coeffs = c1 + c2
    r = z - G @ coeffs
    norm = float(np.linalg.norm(r))
    if norm <= 1e-8 * float(np.linalg.norm(z)):
        raise ContractViolation(f"Seed z_{k} is numerically inside the Krylov span", {"k": k})
    v = r / norm
    drift = float(np.max(np.abs(G.T @ v) / np.linalg.norm(G, axis=0)))
    if drift > 1e-8:
        raise ContractViolation(f"Orthogonality drift {drift:.3e} at step {k}", {"k": k, "drift": drift})
    entry = {(0, k): 1.0 / norm}
    for (i, j), c in zip(pairs, coeffs):
        entry[(i, j)] = -c / norm
    state.coefficients.append(entry)
    state.v_tilde.append(v)


def simulate_from_krylov(alg: AdaptiveAlgorithm, data: KrylovData, rotate: bool = True) -> Tuple[Transcript, SimState]:
    """
    Simulate the adaptive transcript from block-Krylov data alone.

    For k = 1..K: ṽ_k orthogonalizes z_k, v̄_k = v_k applied to the current
    simulated data {Ũ_{1:k-1}ᵀ Λ^i ṽ_j}_{H_{k-1}}, and Ũ_k fixes that data
    while sending Ũ_{1:k-1}ᵀ ṽ_k to v̄_k. The result is
    {Ũ_{1:K}ᵀ Λ^i ṽ_j}_{H_K}; with rotate=False every Ũ_k is the identity.
    """
    K, d = data.K, data.dimension
    if K * K >= d:
        raise UsageError(f"simulate_from_krylov needs K² < d, got K={K}, d={d}")
    state = SimState(data=data, rotated=rotate)
    for k in range(1, K + 1):
        _next_direction(state, k)
        simulated = {p: state.product_T(state.lam_v(p[0], p[1], k), k - 1) for p in index_pairs(k - 1)}
        v_bar = alg.query(k, simulated, d)
        state.v_bar.append(v_bar)
        if rotate:
            y = state.product_T(state.v_tilde[k - 1], k - 1)
            state.rotations.append(_rotation_reflectors(list(simulated.values()), y, v_bar))
        else:
            state.rotations.append(Reflectors())
    transcript = {p: state.product_T(state.lam_v(p[0], p[1], K + 1), K) for p in index_pairs(K)}
    return transcript, state


def identity_residuals(state: SimState, alg: AdaptiveAlgorithm, lam: np.ndarray) -> IdentityResiduals:
    """
    White-box checks of a simulated run against the hidden Λ.

    P2: ṽ_j = Ũ_{1:k} v̄_j for k >= j. P3/P4: v̄_k and Ũ_k recomputed from
    {Ũ_{1:k-1}ᵀ Λ^i Ũ_{1:k-1} v̄_j}_{H_{k-1}}.
    """
    K, d = state.data.K, state.data.dimension
    p2 = p3 = p4 = ortho = 0.0
    for k in range(1, K + 1):
        for j in range(1, k + 1):
            p2 = max(p2, float(np.max(np.abs(state.v_tilde[j - 1] - state.product(state.v_bar[j - 1], k)))))
        alternative: Transcript = {}
        for i, j in index_pairs(k - 1):
            w = state.product(state.v_bar[j - 1], k - 1)
            for _ in range(i):
                w = lam @ w
            alternative[(i, j)] = state.product_T(w, k - 1)
            direct = state.v_tilde[j - 1]
            for _ in range(i):
                direct = lam @ direct
            ortho = max(ortho, abs(float(state.v_tilde[k - 1] @ direct)) / float(np.linalg.norm(direct)))
        if k >= 2:
            p3 = max(p3, float(np.max(np.abs(alg.query(k, alternative, d) - state.v_bar[k - 1]))))
            y = state.product_T(state.v_tilde[k - 1], k - 1)
            recomputed = build_rotation(list(alternative.values()), y, state.v_bar[k - 1])
            p4 = max(p4, float(np.max(np.abs(recomputed - state.rotations[k - 1].matrix(d)))))
    return IdentityResiduals(
        P2_max=p2, P3_max=p3, P4_max=p4, orthogonality_max=ortho,
        audit_passed=state.data.audit_passed(),
    )


# Summaries and tests

def transcript_matrix(transcript: Transcript, K: int) -> np.ndarray:
    return np.column_stack([transcript[p] for p in index_pairs(K)])


def transcript_summary(transcript: Transcript, K: int, probes: int = 3) -> np.ndarray:
    """Gram invariants ⟨x_a, x_b⟩ (upper triangle) plus the first coordinates of every vector."""
    X = transcript_matrix(transcript, K)
    gram = X.T @ X
    iu = np.triu_indices(gram.shape[0])
    return np.concatenate([gram[iu], X[:probes].ravel()])


def transcript_two_sample_test(
    set_a: np.ndarray,
    set_b: np.ndarray,
    permutations: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> TwoSampleResult:
    """Energy permutation test on pooled-standardized summary vectors."""
    A, B = standardize_pair(set_a, set_b)
    return energy_test(A, B, permutations, rng)


def reference_spectrum(dim: int, kappa: float = 4.0) -> np.ndarray:
    return np.linspace(1.0, kappa, dim)


def haar_conjugate(spectrum: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Λ = UᵀDU with a fresh Haar U."""
    U = haar_rotation(len(spectrum), rng)
    return U.T @ (spectrum[:, None] * U)


def reduction_experiment(
    algorithm: str,
    dim: int,
    K: int,
    trials: int,
    seed: int,
    kappa: float = 4.0,
    permutations: Optional[int] = None,
    negative_control: bool = True,
    spectrum: Optional[Sequence[float]] = None,
) -> ReductionReport:
    """
    Adaptive versus simulated transcripts on Haar-rotated diagonal Λ, with
    white-box identity residuals on every simulated run and, optionally, the
    identity-rotation negative control.

    The diagonal is linspace(1, κ, d) unless an explicit spectrum (for
    example a hard-pair diagonal) is given.
    """
    alg = get_algorithm(algorithm)
    if K * K >= dim:
        raise UsageError(f"reduce-sim needs K² < d, got K={K}, d={dim}")
    if spectrum is None:
        spectrum = reference_spectrum(dim, kappa)
    else:
        spectrum = np.asarray(spectrum, dtype=float)
        if spectrum.shape != (dim,):
            raise UsageError(f"Spectrum has shape {spectrum.shape}, expected ({dim},)")

    def adaptive(i: int, rng: np.random.Generator) -> np.ndarray:
        return transcript_summary(run_adaptive(alg, haar_conjugate(spectrum, rng), K), K)

    def simulated(i: int, rng: np.random.Generator) -> Tuple[np.ndarray, IdentityResiduals]:
        lam = haar_conjugate(spectrum, rng)
        data = KrylovData.generate(lam, K, rng)
        transcript, state = simulate_from_krylov(alg, data)
        return transcript_summary(transcript, K), identity_residuals(state, alg, lam)

    def unrotated(i: int, rng: np.random.Generator) -> np.ndarray:
        lam = haar_conjugate(spectrum, rng)
        transcript, _ = simulate_from_krylov(alg, KrylovData.generate(lam, K, rng), rotate=False)
        return transcript_summary(transcript, K)

    set_a = np.array(map_trials(adaptive, trials, seed, path=(0,)))
    sim_results = map_trials(simulated, trials, seed, path=(1,))
    set_b = np.array([r[0] for r in sim_results])

    residuals = IdentityResiduals(
        P2_max=max((r[1].P2_max for r in sim_results), default=0.0),
        P3_max=max((r[1].P3_max for r in sim_results), default=0.0),
        P4_max=max((r[1].P4_max for r in sim_results), default=0.0),
        orthogonality_max=max((r[1].orthogonality_max for r in sim_results), default=0.0),
        audit_passed=all(r[1].audit_passed for r in sim_results),
    )
    if max(residuals.P2_max, residuals.P3_max, residuals.P4_max) > 1e-10:
        logger.warning(f"reduce-sim: identity residuals above 1e-10: {residuals.model_dump()}")

    test = transcript_two_sample_test(set_a, set_b, permutations, np.random.default_rng([seed, 3]))
    control = None
    if negative_control:
        set_c = np.array(map_trials(unrotated, trials, seed, path=(2,)))
        control = transcript_two_sample_test(set_a, set_c, permutations, np.random.default_rng([seed, 4]))
    logger.info(f"reduce-sim: {algorithm}, d={dim}, K={K}, p={test.p_value:.3f}")
    return ReductionReport(
        algorithm=algorithm, dim=dim, K=K, trials=trials,
        identity_residuals=residuals, two_sample=test, negative_control=control,
    )


# Conditioning lemma

def triangular_index(m: int) -> int:
    """k with k(k+1)/2 <= m < (k+1)(k+2)/2."""
    k = 0
    while (k + 1) * (k + 2) // 2 <= m:
        k += 1
    return k


def haar_fixing(span: Sequence[np.ndarray], dimension: int, rng: np.random.Generator) -> np.ndarray:
    """V = QQᵀ + P R Pᵀ with Q spanning the fixed vectors and R Haar on the complement."""
    Q = orthonormal_basis(span, dimension)
    full = linalg.qr(np.hstack([Q, rng.standard_normal((dimension, dimension - Q.shape[1]))]))[0]
    P = full[:, Q.shape[1]:]
    R = haar_rotation(P.shape[1], rng)
    return Q @ Q.T + P @ R @ P.T


def swap_reflection(dimension: int) -> np.ndarray:
    """Fixed reflection exchanging e_1 and e_2."""
    w = np.zeros(dimension)
    w[0], w[1] = 1.0, -1.0
    w /= np.linalg.norm(w)
    return np.eye(dimension) - 2.0 * np.outer(w, w)


def conditioning_summary(queries: Sequence[np.ndarray], lam: np.ndarray, probes: int = 3) -> np.ndarray:
    """⟨v_a, Λ^i v_b⟩ for i = 0..k+1 plus the first coordinates of Λv_a."""
    X = np.column_stack(queries)
    k = X.shape[1]
    iu = np.triu_indices(k)
    parts = []
    power = X
    for _ in range(k + 2):
        parts.append((X.T @ power)[iu])
        power = lam @ power
    parts.append((lam @ X)[:probes].ravel())
    return np.concatenate(parts)


def conditioning_lemma_check(
    d: int,
    m: int,
    trials: int,
    seed: int,
    algorithm: str = "power",
    negative_control: bool = False,
    kappa: float = 4.0,
    permutations: Optional[int] = None,
) -> TwoSampleResult:
    """
    Compare summaries of (X_k, U) with those of (X_k, UV), V a Haar rotation
    fixing W_m (or, for the negative control, a fixed reflection).

    Here X_k = {v_1..v_k} is generated under Λ = UᵀDU and the summary
    reads X_k against Λ or against VᵀΛV.
    """
    if d > 16 or not 1 <= m < d:
        raise UsageError(f"conditioning_lemma_check needs d <= 16 and 1 <= m < d, got d={d}, m={m}")
    alg = get_algorithm(algorithm)
    spectrum = reference_spectrum(d, kappa)
    k = triangular_index(m)

    def generate(rng: np.random.Generator) -> Tuple[np.ndarray, List[np.ndarray], Transcript]:
        lam = haar_conjugate(spectrum, rng)
        order = enumeration_order(max(m, k * (k + 1) // 2))
        transcript = adaptive_sequence(alg, lam, len(order))
        queries = [transcript[(0, j)] for j in range(1, k + 1)]
        window = [transcript[p] for p in enumeration_order(m)]
        return lam, queries, window

    def plain(i: int, rng: np.random.Generator) -> np.ndarray:
        lam, queries, _ = generate(rng)
        return conditioning_summary(queries, lam)

    def rotated(i: int, rng: np.random.Generator) -> np.ndarray:
        lam, queries, window = generate(rng)
        V = swap_reflection(d) if negative_control else haar_fixing(window, d, rng)
        return conditioning_summary(queries, V.T @ lam @ V)

    set_a = np.array(map_trials(plain, trials, seed, path=(0, m)))
    set_b = np.array(map_trials(rotated, trials, seed, path=(1, m)))
    result = transcript_two_sample_test(set_a, set_b, permutations, np.random.default_rng([seed, m]))
    logger.info(f"conditioning check: d={d}, m={m}, k={k}, control={negative_control}, p={result.p_value:.3f}")
    return result
