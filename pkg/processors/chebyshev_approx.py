"""
Chebyshev approximation processor - polynomials in the Chebyshev basis of
a working interval, grid certificates, extrema nodes and finite-point minimax.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial import chebyshev as C

from config import settings
from errors import CertificationError, UsageError

logger = logging.getLogger(__name__)


@dataclass
class ChebyshevPolynomial:
    """p(x) = Σ_k coeffs[k]·T_k(2(x-lo)/(hi-lo) - 1) on interval (lo, hi)."""
    degree: int
    interval: Tuple[float, float]
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if len(self.coeffs) != self.degree + 1:
            raise ValueError(
                f"Degree {self.degree} needs {self.degree + 1} coefficients, got {len(self.coeffs)}"
            )

    def to_unit(self, x):
        lo, hi = self.interval
        return 2.0 * (np.asarray(x, dtype=float) - lo) / (hi - lo) - 1.0

    def __call__(self, x):
        # chebval runs the Clenshaw backward recurrence
        return C.chebval(self.to_unit(x), self.coeffs)

    def apply_to_operator(
        self,
        matvec: Callable[[np.ndarray], np.ndarray],
        block: np.ndarray,
    ) -> np.ndarray:
        """
        Compute p(A)·block with a Clenshaw recurrence on the operator.

        Exactly ``degree`` calls to ``matvec`` are made, each on an array
        shaped like ``block``.
        """
        lo, hi = self.interval
        scale, shift = 2.0 / (hi - lo), (hi + lo) / (hi - lo)

        def mapped(v: np.ndarray) -> np.ndarray:
            return scale * matvec(v) - shift * v

        c = self.coeffs
        if self.degree == 0:
            return c[0] * block
        b_next = np.zeros_like(block, dtype=float)
        b_next2 = np.zeros_like(block, dtype=float)
        for k in range(self.degree, 0, -1):
            if k == self.degree:
                b_k = c[k] * block
            else:
                b_k = c[k] * block + 2.0 * mapped(b_next) - b_next2
            b_next2, b_next = b_next, b_k
        return c[0] * block + mapped(b_next) - b_next2

    def max_error(self, target: Callable[[np.ndarray], np.ndarray], points: Optional[int] = None) -> float:
        grid = certification_grid(self.interval, points)
        return float(np.max(np.abs(self(grid) - target(grid))))


def certification_grid(interval: Tuple[float, float], points: Optional[int] = None) -> np.ndarray:
    """Uniform grid (endpoints included) used for every certificate."""
    n = points or settings.cert_grid_points
    return np.linspace(interval[0], interval[1], n)


def cheb_value(K: int, x: float) -> float:
    """T_K(x), using the trigonometric form inside [-1, 1] and cosh outside."""
    if K < 0:
        raise ValueError(f"Chebyshev degree must be non-negative, got {K}")
    if K == 0:
        return 1.0
    if abs(x) <= 1.0:
        return math.cos(K * math.acos(x))
    value = math.cosh(K * math.acosh(abs(x)))
    return value if x > 0 or K % 2 == 0 else -value


def monomial_approx(s: int, delta: float) -> ChebyshevPolynomial:
    """
    Truncated Chebyshev expansion of x^s on [-1, 1].

    Args:
        s: Monomial power, s >= 1
        delta: Uniform error budget in (0, 1)

    Returns:
        Polynomial of degree min(s, ceil(sqrt(2 s ln(2/delta))))

    Raises:
        CertificationError: If the grid error exceeds delta
    """
    if s < 1 or not 0 < delta < 1:
        raise UsageError(f"monomial_approx needs s >= 1 and 0 < delta < 1, got s={s}, delta={delta}")
    # capped at s, where the expansion is exact: s=2, delta=0.6 gives degree 2
    degree = min(s, math.ceil(math.sqrt(2 * s * math.log(2 / delta))))
    full = C.poly2cheb([0.0] * s + [1.0])
    poly = ChebyshevPolynomial(degree, (-1.0, 1.0), full[: degree + 1])
    error = poly.max_error(lambda x: x ** s)
    if error > delta:
        raise CertificationError(
            f"x^{s} truncation at degree {degree} has grid error {error:.3e} > {delta}",
            {"s": s, "delta": delta, "degree": degree, "error": error},
        )
    return poly


def _interpolate_inv_sqrt(kappa: float, degree: int) -> ChebyshevPolynomial:
    fit = C.Chebyshev.interpolate(lambda x: x ** -0.5, degree, domain=[1.0, kappa])
    coeffs = np.zeros(degree + 1)
    coeffs[: len(fit.coef)] = fit.coef
    return ChebyshevPolynomial(degree, (1.0, kappa), coeffs)


def inv_sqrt_approx(kappa: float, delta: float) -> ChebyshevPolynomial:
    """
    Smallest certified Chebyshev interpolant of x^{-1/2} on [1, κ].

    The certificate is max|q(x) - x^{-1/2}| ≤ δ/√κ on the grid. The degree
    is found by doubling and then bisecting between the last failure and
    the first success.

    Raises:
        CertificationError: If no degree up to 64·√κ·log(κ/δ) certifies
    """
    if kappa < 2 or not 0 < delta < 0.5:
        raise UsageError(f"inv_sqrt_approx needs kappa >= 2 and 0 < delta < 1/2, got {kappa}, {delta}")
    tol = delta / math.sqrt(kappa)
    ceiling = math.ceil(64 * math.sqrt(kappa) * math.log(kappa / delta))

    def target(x):
        return x ** -0.5

    def certified(n: int) -> Optional[ChebyshevPolynomial]:
        poly = _interpolate_inv_sqrt(kappa, n)
        return poly if poly.max_error(target) <= tol else None

    failed, degree = 0, 1
    found = certified(degree)
    while found is None:
        failed, degree = degree, 2 * degree
        if degree > ceiling:
            degree = ceiling
            found = certified(degree)
            if found is None:
                raise CertificationError(
                    f"No degree <= {ceiling} certifies x^(-1/2) on [1, {kappa}] to {tol:.3e}",
                    {"kappa": kappa, "delta": delta},
                )
            break
        found = certified(degree)

    lo, hi = failed, degree
    while hi - lo > 1:
        mid = (lo + hi) // 2
        candidate = certified(mid)
        if candidate is None:
            lo = mid
        else:
            hi, found = mid, candidate
    logger.info(f"inv_sqrt_approx: kappa={kappa}, delta={delta} -> degree {found.degree}")
    return found


def inv_sqrt_taylor_reference(kappa: float, delta: float) -> ChebyshevPolynomial:
    """
    Reference construction of q_{κ,δ}: Taylor series of (1-u)^{-1/2} with
    u = 1 - x/κ, each u^s replaced by monomial_approx(s, δ').

    Much higher degree than inv_sqrt_approx; kept for comparison.
    """
    if kappa < 2 or not 0 < delta < 0.5:
        raise UsageError(f"Taylor reference needs kappa >= 2 and 0 < delta < 1/2, got {kappa}, {delta}")
    terms = math.ceil(kappa * math.log(2 * kappa / delta))
    inner_delta = delta / (2 * terms)
    u_coeffs = np.zeros(1)
    weight = 1.0
    for s in range(terms + 1):
        if s == 0:
            piece = np.ones(1)
        else:
            weight *= (2 * s - 1) / (2 * s)
            piece = weight * monomial_approx(s, inner_delta).coeffs
        u_coeffs = C.chebadd(u_coeffs, piece)
    degree = len(u_coeffs) - 1

    def in_x(x):
        return C.chebval(1.0 - np.asarray(x) / kappa, u_coeffs) / math.sqrt(kappa)

    fit = C.Chebyshev.interpolate(in_x, degree, domain=[1.0, kappa])
    poly = ChebyshevPolynomial(degree, (1.0, kappa), fit.coef)
    error = poly.max_error(lambda x: x ** -0.5)
    if error > delta / math.sqrt(kappa):
        raise CertificationError(
            f"Taylor reference misses its certificate: {error:.3e}",
            {"kappa": kappa, "delta": delta, "degree": degree},
        )
    return poly


@dataclass(frozen=True)
class NodeSet:
    """Affine images κ = λ_1 > ... > λ_{K+2} = 1 of the extrema of T_{K+1}."""
    K: int
    kappa: float
    nodes: Tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.nodes)


def extrema_nodes(K: int, kappa: float) -> NodeSet:
    if K < 1 or kappa <= 1:
        raise UsageError(f"extrema_nodes needs K >= 1 and kappa > 1, got K={K}, kappa={kappa}")
    beta = np.cos(np.arange(K + 2) * np.pi / (K + 1))
    nodes = (kappa - 1) / 2 * (beta + 1) + 1
    nodes[0], nodes[-1] = kappa, 1.0
    return NodeSet(K, float(kappa), tuple(float(v) for v in nodes))


def _levelled_solution(nodes: np.ndarray, degree: int, interval: Tuple[float, float]):
    lo, hi = interval
    t = 2 * (nodes - lo) / (hi - lo) - 1
    system = np.empty((degree + 2, degree + 2))
    system[:, : degree + 1] = C.chebvander(t, degree)
    system[:, degree + 1] = (-1.0) ** np.arange(degree + 2)
    solution = np.linalg.solve(system, 1.0 / nodes)
    return solution[: degree + 1], abs(float(solution[degree + 1]))


def finite_minimax(nodes: NodeSet, degree: int) -> Tuple[float, ChebyshevPolynomial]:
    """
    Best uniform approximation of 1/x on a finite node set.

    With degree + 2 nodes the equioscillation system is solved directly.
    With more nodes the error is the largest levelled error over all
    (degree + 2)-subsets, which is the discrete minimax value.

    Returns:
        Tuple of (E, P) with E = max_i |1/λ_i - P(λ_i)|

    Raises:
        UsageError: If nodes repeat
    """
    values = nodes.as_array()
    if len(np.unique(values)) != len(values):
        raise UsageError("finite_minimax needs distinct nodes")
    interval = (float(values.min()), float(values.max()))
    if degree < 0:
        raise UsageError(f"Degree must be non-negative, got {degree}")

    if degree + 2 > len(values):
        coeffs = C.chebfit(2 * (values - interval[0]) / (interval[1] - interval[0]) - 1, 1.0 / values, len(values) - 1)
        coeffs = np.concatenate([coeffs, np.zeros(degree + 1 - len(coeffs))])
        return 0.0, ChebyshevPolynomial(degree, interval, coeffs)

    best_error, best_coeffs = -1.0, None
    ordered = np.sort(values)[::-1]
    for subset in itertools.combinations(range(len(ordered)), degree + 2):
        coeffs, error = _levelled_solution(ordered[list(subset)], degree, interval)
        if error > best_error:
            best_error, best_coeffs = error, coeffs
    poly = ChebyshevPolynomial(degree, interval, best_coeffs)
    residual = float(np.max(np.abs(1.0 / values - poly(values))))
    return residual, poly
