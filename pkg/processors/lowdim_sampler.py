"""
Low-dimensional sampler processor - ellipsoid rounding of the sublevel set
{V <= 1} from first-order queries, then rejection sampling from a dilation
of the rounding ellipsoid.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from config import settings
from errors import ContractViolation, UsageError
from processors.query_oracle import FirstOrderOracle

logger = logging.getLogger(__name__)


@dataclass
class Ellipsoid:
    """{x : (x - z)ᵀ A (x - z) <= 1}."""
    center: np.ndarray
    shape: np.ndarray
    dilation: float = 1.0

    @classmethod
    def ball(cls, dim: int, radius: float, center: Optional[np.ndarray] = None) -> "Ellipsoid":
        z = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls(z, np.eye(dim) / radius ** 2)

    @classmethod
    def from_inverse(cls, center: np.ndarray, inverse_shape: np.ndarray) -> "Ellipsoid":
        inverse_shape = 0.5 * (inverse_shape + inverse_shape.T)
        return cls(np.array(center, dtype=float), linalg.inv(inverse_shape))

    @property
    def dim(self) -> int:
        return len(self.center)

    def dilate(self, factor: float) -> "Ellipsoid":
        if factor <= 0:
            raise ValueError(f"Dilation factor must be positive, got {factor}")
        return Ellipsoid(self.center.copy(), self.shape / factor ** 2, self.dilation * factor)

    def mahalanobis(self, points: np.ndarray) -> np.ndarray:
        diff = np.atleast_2d(points) - self.center
        return np.einsum("ij,jk,ik->i", diff, self.shape, diff)

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return self.mahalanobis(points) <= 1.0 + tol

    def volume(self) -> float:
        d = self.dim
        unit = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
        return unit / math.sqrt(float(linalg.det(self.shape)))

    def boundary_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        directions = rng.standard_normal((count, self.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        return self._push(directions)

    def _push(self, unit_points: np.ndarray) -> np.ndarray:
        # A = LLᵀ, x = z + L^{-T} y maps the unit ball onto the ellipsoid
        factor = linalg.cholesky(self.shape, lower=True)
        return self.center + linalg.solve_triangular(factor.T, unit_points.T, lower=False).T


@dataclass
class SublevelOracle:
    """Membership and separation for B_V(level) from a first-order oracle."""
    inner: FirstOrderOracle
    level: float = 1.0


@dataclass
class MembershipResult:
    inside: bool
    normal: Optional[np.ndarray] = None
    value: float = 0.0


def membership_separation(oracle: SublevelOracle, x: np.ndarray) -> MembershipResult:
    """In iff V(x) <= level; otherwise Out with normal ∇V(x). One query."""
    value, grad = oracle.inner.evaluate(x)
    if value <= oracle.level:
        return MembershipResult(True, None, value)
    return MembershipResult(False, grad, value)


@dataclass
class RoundingResult:
    inner: Ellipsoid
    outer: Ellipsoid
    queries: int
    iterations: int
    query_budget: int


def _cut(center: np.ndarray, inv_shape: np.ndarray, normal: np.ndarray, depth: float):
    # keeps {x : gᵀ(x - z) <= -depth·sqrt(gᵀPg)}; depth in [-1/d, 1)
    d = len(center)
    gpg = float(normal @ inv_shape @ normal)
    b = inv_shape @ normal / math.sqrt(gpg)
    tau = (1 + d * depth) / (d + 1)
    sigma = 2 * (1 + d * depth) / ((d + 1) * (1 + depth))
    stretch = d ** 2 * (1 - depth ** 2) / (d ** 2 - 1)
    new_center = center - tau * b
    new_inv = stretch * (inv_shape - sigma * np.outer(b, b))
    return new_center, 0.5 * (new_inv + new_inv.T)


def ellipsoid_round(
    oracle: SublevelOracle,
    dim: int,
    kappa: float,
    strong_convexity: float = 1.0,
) -> RoundingResult:
    """
    Round B_V(1) between two concentric ellipsoids.

    Starts from the ball of radius sqrt(2/α) and stops as soon as the center
    and the 2d points z ± a_i/(d+1) on the semi-axes are all inside, which
    certifies that E_out shrunk by (d+1)·sqrt(d) lies in B_V(1).

    Args:
        oracle: Sublevel oracle at level 1
        dim: Dimension d >= 2
        kappa: Smoothness bound; B_V(1) contains the ball of radius sqrt(2/κ)
        strong_convexity: α, so that B_V(1) lies in the ball of radius sqrt(2/α)

    Returns:
        RoundingResult with inner E and outer E' = (d+1)·sqrt(d)·E

    Raises:
        ContractViolation: If the query budget is exhausted
    """
    if dim < 2:
        raise UsageError(f"Ellipsoid rounding needs d >= 2, got {dim}")
    if dim > settings.lowdim_max_dim:
        raise UsageError(f"Dimension {dim} exceeds the configured cap {settings.lowdim_max_dim}")
    outer_radius = math.sqrt(2 / strong_convexity)
    inner_radius = math.sqrt(2 / kappa)
    log_ratio = max(math.log(outer_radius / inner_radius), 1.0)
    budget = math.ceil(settings.rounding_iteration_constant * dim ** 2 * (dim + 1) * log_ratio)

    start = oracle.inner.query_count
    center = np.zeros(dim)
    inv_shape = np.eye(dim) * outer_radius ** 2
    iterations = 0

    while True:
        if oracle.inner.query_count - start > budget:
            raise ContractViolation(
                f"Ellipsoid rounding exceeded {budget} queries",
                {"dim": dim, "kappa": kappa, "iterations": iterations},
            )
        iterations += 1
        probe = membership_separation(oracle, center)
        if not probe.inside:
            center, inv_shape = _cut(center, inv_shape, probe.normal, 0.0)
            continue

        eigvals, eigvecs = linalg.eigh(inv_shape)
        cut_made = False
        for i in range(dim):
            step = math.sqrt(eigvals[i]) / (dim + 1) * eigvecs[:, i]
            for point in (center + step, center - step):
                probe = membership_separation(oracle, point)
                if probe.inside:
                    continue
                g = probe.normal
                gpg = float(g @ inv_shape @ g)
                depth = float(g @ (center - point)) / math.sqrt(gpg)
                depth = min(max(depth, -1.0 / (dim + 1)), 1.0 - 1e-12)
                center, inv_shape = _cut(center, inv_shape, g, depth)
                cut_made = True
                break
            if cut_made:
                break
        if not cut_made:
            break

    factor = (dim + 1) * math.sqrt(dim)
    outer = Ellipsoid.from_inverse(center, inv_shape)
    outer.dilation = factor
    inner = Ellipsoid(outer.center.copy(), outer.shape * factor ** 2)
    queries = oracle.inner.query_count - start
    logger.info(f"ellipsoid_round: d={dim}, kappa={kappa} -> {iterations} iterations, {queries} queries")
    return RoundingResult(inner, outer, queries, iterations, budget)


def rejection_radius(dim: int, eps: float) -> int:
    """t = ceil(4(d log d + log(1/ε)) + 8)."""
    return math.ceil(4 * (dim * math.log(dim) + math.log(1 / eps)) + 8)


def uniform_in_ellipsoid(ellipsoid: Ellipsoid, rng: np.random.Generator, count: int = 1) -> np.ndarray:
    """Uniform draws from the ellipsoid as a (count, d) array."""
    d = ellipsoid.dim
    directions = rng.standard_normal((count, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.random(count) ** (1.0 / d)
    return ellipsoid._push(directions * radii[:, None])


@dataclass
class RejectionRun:
    samples: np.ndarray
    proposals: int
    accepted_in_e: int = 0
    proposed_in_e: int = 0


def rejection_sample_many(
    oracle: FirstOrderOracle,
    outer: Ellipsoid,
    dim: int,
    eps: float,
    count: int,
    rng: np.random.Generator,
    inner: Optional[Ellipsoid] = None,
    batch: int = 200_000,
) -> RejectionRun:
    """
    Exact rejection sampling of exp(-V) restricted to t·E'.

    Proposals are uniform in t·E' and accepted with probability exp(-V);
    every evaluated proposal costs one query. The proposal budget applies
    per requested sample.

    Raises:
        ContractViolation: If the proposal budget is exhausted
    """
    t = rejection_radius(dim, eps)
    region = outer.dilate(t)
    accepted: List[np.ndarray] = []
    have = 0
    proposals = 0
    in_e = acc_in_e = 0
    budget = settings.proposal_budget * count
    while have < count:
        if proposals >= budget:
            raise ContractViolation(
                f"Rejection sampling exceeded {budget} proposals",
                {"accepted": have, "requested": count},
            )
        size = min(batch, budget - proposals)
        points = uniform_in_ellipsoid(region, rng, size)
        values = oracle.evaluate_many(points)
        keep = rng.random(size) < np.exp(-values)
        proposals += size
        if inner is not None:
            mask = inner.contains(points)
            in_e += int(mask.sum())
            acc_in_e += int((keep & mask).sum())
        taken = points[keep][: count - have]
        accepted.append(taken)
        have += len(taken)
    return RejectionRun(np.vstack(accepted), proposals, acc_in_e, in_e)


def rejection_sample(
    oracle: FirstOrderOracle,
    outer: Ellipsoid,
    dim: int,
    eps: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """A single accepted point; proposals are drawn one small batch at a time."""
    return rejection_sample_many(oracle, outer, dim, eps, 1, rng, batch=1024).samples[0]


def sample_lowdim(
    oracle: FirstOrderOracle,
    dim: int,
    kappa: float,
    eps: float,
    count: int,
    rng: np.random.Generator,
    strong_convexity: float = 1.0,
) -> Tuple[np.ndarray, Dict[str, float]]:
    """
    Round, then rejection-sample ``count`` points.

    Returns:
        Tuple of (samples, stats) with rounding, proposal and total counts
    """
    rounding = ellipsoid_round(SublevelOracle(oracle), dim, kappa, strong_convexity)
    run = rejection_sample_many(oracle, rounding.outer, dim, eps, count, rng, inner=rounding.inner)
    stats = {
        "rounding_queries": rounding.queries,
        "iterations": rounding.iterations,
        "proposals": run.proposals,
        "proposals_per_sample": run.proposals / count,
        "total_queries": oracle.query_count,
        "acceptance_in_inner": (run.accepted_in_e / run.proposed_in_e) if run.proposed_in_e else float("nan"),
    }
    return run.samples, stats


def quadratic_potential_matrix(kappa: float, dim: int = 2) -> np.ndarray:
    """diag(1, ..., 1, κ)."""
    diag = np.ones(dim)
    diag[-1] = kappa
    return np.diag(diag)


def binned_tv_against_quadrature(
    samples: np.ndarray,
    potential_batch,
    box: Tuple[Tuple[float, float], Tuple[float, float]],
    bins: int = 20,
    refine: int = 10,
) -> float:
    """
    TV between the binned sample law and the binned law of exp(-V).

    The reference mass of each bin comes from a midpoint rule with
    ``refine``² nodes; both laws are normalized over the box.
    """
    (x0, x1), (y0, y1) = box
    hist, _, _ = np.histogram2d(samples[:, 0], samples[:, 1], bins=bins, range=[[x0, x1], [y0, y1]])
    empirical = hist / max(hist.sum(), 1)

    fine = bins * refine
    xs = x0 + (np.arange(fine) + 0.5) * (x1 - x0) / fine
    ys = y0 + (np.arange(fine) + 0.5) * (y1 - y0) / fine
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    values = potential_batch(np.column_stack([gx.ravel(), gy.ravel()])).reshape(fine, fine)
    weights = np.exp(-values)
    reference = weights.reshape(bins, refine, bins, refine).sum(axis=(1, 3))
    reference /= reference.sum()
    return 0.5 * float(np.abs(empirical - reference).sum())


def fit_log_signature(kappas: List[float], counts: List[float]) -> Dict[str, float]:
    """Least-squares fit counts ≈ a + b·log κ with its R²."""
    x = np.log(np.asarray(kappas, dtype=float))
    y = np.asarray(counts, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ np.array([a, b])
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"a": float(a), "b": float(b), "r2": r2}
