"""
Gaussian sampler processor - draws N(0, Λ^{-1}) through matrix-vector queries.

Krylov path: Y = q(Λ)X with q ≈ x^{-1/2} certified on [1, κ], costing R
queries. Exact path: learn Λ with d queries and factor it.
"""
import logging
import math
from typing import Dict, Tuple

import numpy as np
from scipy import linalg

from config import settings
from errors import NumericalError, OracleError, UsageError
from models import KrylovSamplerPlan, SamplerMethod
from processors.chebyshev_approx import ChebyshevPolynomial, inv_sqrt_approx
from processors.query_oracle import MatVecOracle

logger = logging.getLogger(__name__)


def plan(kappa: float, dim: int, eps: float) -> KrylovSamplerPlan:
    """
    Choose between the Krylov and the exact path.

    Args:
        kappa: Upper end of the spectrum (lower end is 1)
        dim: Dimension d
        eps: Target KL is eps²

    Returns:
        KrylovSamplerPlan with the certified degree and the query budget
    """
    if kappa < 1 or dim < 1 or not 0 < eps < 1:
        raise UsageError(f"plan needs kappa >= 1, dim >= 1, 0 < eps < 1; got {kappa}, {dim}, {eps}")
    c_delta = settings.c_delta
    delta = eps / (c_delta * math.sqrt(dim))

    if kappa == 1:
        return KrylovSamplerPlan(
            kappa=kappa, dim=dim, eps=eps, method=SamplerMethod.KRYLOV, degree=0,
            delta=delta, c_delta=c_delta, query_budget=0, coeffs=[1.0],
        )

    q = inv_sqrt_approx(max(kappa, 2.0), min(delta, 0.49))
    if q.degree < dim:
        method, budget = SamplerMethod.KRYLOV, q.degree
    else:
        method, budget = SamplerMethod.EXACT, dim
    logger.info(f"plan: kappa={kappa}, d={dim}, eps={eps} -> {method.value} with {budget} queries")
    return KrylovSamplerPlan(
        kappa=kappa, dim=dim, eps=eps, method=method,
        degree=q.degree if method == SamplerMethod.KRYLOV else None,
        delta=delta, c_delta=c_delta, query_budget=budget,
        coeffs=q.coeffs.tolist() if method == SamplerMethod.KRYLOV else [],
    )


def plan_polynomial(p: KrylovSamplerPlan) -> ChebyshevPolynomial:
    """The q polynomial stored in a Krylov plan."""
    if p.method != SamplerMethod.KRYLOV:
        raise UsageError("Exact plans carry no polynomial")
    hi = max(p.kappa, 2.0) if p.kappa > 1 else 2.0
    return ChebyshevPolynomial(p.degree, (1.0, hi), np.array(p.coeffs))


def _exact_factor(oracle: MatVecOracle) -> np.ndarray:
    learned = oracle.query(np.eye(oracle.dimension))
    learned = 0.5 * (learned + learned.T)
    # Λ = LLᵀ, Λ^{-1} = L^{-T}L^{-1}
    try:
        factor = linalg.cholesky(learned, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Learned matrix is not positive definite: {e}")
    if float(np.min(np.abs(np.diag(factor)))) < 1e-12:
        raise NumericalError("Cholesky pivot below 1e-12")
    return factor


def sample_many(
    p: KrylovSamplerPlan,
    oracle: MatVecOracle,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Draw ``count`` samples as the rows of a (count, d) array.

    The Krylov path applies q(Λ) to all seeds at once, so the oracle is
    charged R·count queries; the exact path is charged d once.
    """
    if oracle.dimension != p.dim:
        raise OracleError(f"Plan is for d={p.dim} but oracle has d={oracle.dimension}")
    seeds = rng.standard_normal((p.dim, count))
    if p.method == SamplerMethod.KRYLOV:
        if p.degree == 0:
            return (p.coeffs[0] * seeds).T
        q = plan_polynomial(p)
        return q.apply_to_operator(oracle.query, seeds).T
    factor = _exact_factor(oracle)
    return linalg.solve_triangular(factor.T, seeds, lower=False).T


def sample(p: KrylovSamplerPlan, oracle: MatVecOracle, rng: np.random.Generator) -> np.ndarray:
    """One sample Y ∈ R^d; costs R queries (Krylov) or d queries (exact)."""
    return sample_many(p, oracle, 1, rng)[0]


def exact_kl_centered(sigma_hat: np.ndarray, sigma: np.ndarray) -> Tuple[float, float]:
    """
    KL(N(0, Σ̂) ‖ N(0, Σ)) and the bound Σ_k (r_k - 1)².

    r_k are the generalized eigenvalues of (Σ̂, Σ); when Σ̂ = q(Λ)² and
    Σ = Λ^{-1} they equal q(λ_k)²λ_k.

    Raises:
        NumericalError: If either matrix is not SPD
    """
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma_hat.shape != sigma.shape:
        raise UsageError(f"Shape mismatch {sigma_hat.shape} vs {sigma.shape}")
    try:
        linalg.cholesky(sigma_hat)
        linalg.cholesky(sigma)
        ratios = linalg.eigh(sigma_hat, sigma, eigvals_only=True)
    except linalg.LinAlgError as e:
        raise NumericalError(f"KL needs SPD covariances: {e}")
    kl = 0.5 * float(np.sum(ratios - 1.0 - np.log(ratios)))
    bound = float(np.sum((ratios - 1.0) ** 2))
    return kl, bound


def diagonal_kl(p: KrylovSamplerPlan, spectrum: np.ndarray) -> Tuple[float, float]:
    """Closed-form KL(N(0, q(Λ)²) ‖ N(0, Λ^{-1})) for Λ = diag(spectrum)."""
    spectrum = np.asarray(spectrum, dtype=float)
    if p.method == SamplerMethod.EXACT:
        return 0.0, 0.0
    if p.degree == 0:
        ratios = p.coeffs[0] ** 2 * spectrum
    else:
        ratios = plan_polynomial(p)(spectrum) ** 2 * spectrum
    kl = 0.5 * float(np.sum(ratios - 1.0 - np.log(ratios)))
    return kl, float(np.sum((ratios - 1.0) ** 2))


def spectrum_family(kind: str, dim: int, kappa: float) -> np.ndarray:
    """Diagonal test spectra in [1, κ]: uniform grid, two clusters, Chebyshev extrema."""
    if kind == "uniform":
        return np.linspace(1.0, kappa, dim)
    if kind == "two-cluster":
        half = dim // 2
        return np.concatenate([np.full(half, 1.0), np.full(dim - half, float(kappa))])
    if kind == "chebyshev":
        beta = np.cos(np.arange(dim) * np.pi / max(dim - 1, 1))
        return (kappa - 1) / 2 * (beta + 1) + 1
    raise UsageError(f"Unknown spectrum family '{kind}'")


SPECTRUM_KINDS = ("uniform", "two-cluster", "chebyshev")


def kl_table_row(kappa: float, dim: int, eps: float, kind: str) -> Dict[str, object]:
    """One row of the gauss-kl table."""
    p = plan(kappa, dim, eps)
    kl, bound = diagonal_kl(p, spectrum_family(kind, dim, kappa))
    return {
        "kappa": kappa,
        "dim": dim,
        "eps": eps,
        "spectrum": kind,
        "method": p.method.value,
        "degree": p.degree if p.degree is not None else "",
        "queries": p.query_budget,
        "exact_kl": kl,
        "paper_bound": bound,
        "tv_bound": math.sqrt(max(kl, 0.0) / 2),
    }
