"""
Kakeya family processor - the multiscale family of convex piecewise-linear
potentials on the plane that hide a bit string b in the directions of their
zero sets.

All slab thresholds use the dyadic prefix values [b]_ℓ exactly, so values of
two potentials whose strings share a prefix coincide bit for bit wherever
only the shared hinges are active.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from errors import NumericalError, UsageError
from models import LeakageReport, LeakStrategy
from processors.query_oracle import FirstOrderOracle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BitString:
    """b_1..b_N with prefix values [b]_ℓ = Σ_{i<=ℓ} b_i 2^{-(i+2)}."""
    bits: Tuple[int, ...]

    def __post_init__(self):
        if not self.bits or any(b not in (0, 1) for b in self.bits):
            raise UsageError(f"Bit string must be a non-empty sequence of 0/1, got {self.bits}")

    @classmethod
    def parse(cls, text: str) -> "BitString":
        return cls(tuple(int(c) for c in text.strip()))

    @classmethod
    def from_int(cls, value: int, N: int) -> "BitString":
        return cls(tuple((value >> (N - 1 - i)) & 1 for i in range(N)))

    @property
    def N(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def common_prefix(self, other: "BitString") -> int:
        count = 0
        for a, b in zip(self.bits, other.bits):
            if a != b:
                break
            count += 1
        return count


def prefix_value(b: BitString, ell: int) -> Fraction:
    """Exact dyadic [b]_ℓ; ℓ > N gives [b]_N."""
    if ell < 0:
        raise UsageError(f"Prefix length must be non-negative, got {ell}")
    ell = min(ell, b.N)
    numerator = 0
    for i in range(ell):
        numerator = 2 * numerator + b.bits[i]
    return Fraction(numerator, 2 ** (ell + 2))


def all_bitstrings(N: int) -> List[BitString]:
    return [BitString.from_int(v, N) for v in range(2 ** N)]


@dataclass(frozen=True)
class KakeyaProfile:
    """
    Exponents in κ = 2^N: slope κ^{p_slope}, quadratic coefficient
    κ^{-p_quad}/2 and mollification radius κ^{-p_delta}.
    """
    name: str = "full"
    p_slope: float = 7.0
    p_quad: float = 16.0
    p_delta: float = 5.0

    @classmethod
    def full(cls) -> "KakeyaProfile":
        return cls()

    @classmethod
    def reduced(cls, p_slope: float = 3.0, p_quad: float = 4.0, p_delta: float = 5.0) -> "KakeyaProfile":
        return cls("reduced", p_slope, p_quad, p_delta)


# 57-node disk rule: center disk plus 8 annuli of 7 nodes, weights = area fractions
def _disk_rule() -> Tuple[np.ndarray, np.ndarray]:
    edges = (1.0 + np.arange(9)) / 9.0
    offsets = [np.zeros((1, 2))]
    weights = [np.array([edges[0] ** 2])]
    for i in range(1, 9):
        radius = math.sqrt((edges[i - 1] ** 2 + edges[i] ** 2) / 2)
        angles = 2 * math.pi * np.arange(7) / 7 + i * math.pi / 7
        offsets.append(radius * np.column_stack([np.cos(angles), np.sin(angles)]))
        weights.append(np.full(7, (edges[i] ** 2 - edges[i - 1] ** 2) / 7))
    return np.vstack(offsets), np.concatenate(weights)


DISK_OFFSETS, DISK_WEIGHTS = _disk_rule()


@dataclass
class KakeyaPotential:
    """V_b = Ṽ_b * χ_δ + quad_scale·‖·‖², Ṽ_b = slope·max_k 2^{-k} φ_k."""
    b: BitString
    profile: KakeyaProfile = field(default_factory=KakeyaProfile.full)
    normalized: Optional[bool] = None

    def __post_init__(self):
        if self.normalized is None:
            self.normalized = settings.mollifier_normalized
        N = self.b.N
        self._prefixes = np.array([float(prefix_value(self.b, k)) for k in range(1, N + 1)])
        self._widths = np.array([2.0 ** -k for k in range(1, N + 1)])
        self._offsets = np.array([2.0 ** -(3 * N - k) for k in range(1, N + 1)])

    @property
    def N(self) -> int:
        return self.b.N

    @property
    def kappa(self) -> float:
        return 2.0 ** self.N

    @property
    def slope_scale(self) -> float:
        return 2.0 ** (self.profile.p_slope * self.N)

    @property
    def quad_scale(self) -> float:
        return 0.5 * 2.0 ** (-self.profile.p_quad * self.N)

    @property
    def delta(self) -> float:
        return 2.0 ** (-self.profile.p_delta * self.N)

    def phi_all(self, x, y) -> np.ndarray:
        """φ_k for k = 1..N stacked on the last axis."""
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        return np.maximum(np.abs(y - self._prefixes * x) - (self._widths * x + self._offsets), 0.0)

    def v_tilde(self, x, y):
        scaled = self.phi_all(x, y) * self._widths
        return self.slope_scale * np.max(scaled, axis=-1)

    def v_tilde_subgradient(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        phis = self.phi_all(x, y)
        k = np.argmax(phis * self._widths, axis=-1)
        active = np.take_along_axis(phis, k[..., None], axis=-1)[..., 0] > 0
        beta = self._prefixes[k]
        width = self._widths[k]
        sign = np.sign(y - beta * x)
        scale = self.slope_scale * width * active
        return np.stack([scale * (-beta * sign - width), scale * sign], axis=-1)

    def _nodes(self, x, y):
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        return x + self.delta * DISK_OFFSETS[:, 0], y + self.delta * DISK_OFFSETS[:, 1]

    def _mollifier_scale(self) -> float:
        return 1.0 if self.normalized else math.pi * self.delta ** 2

    def mollified(self, x, y):
        nx, ny = self._nodes(x, y)
        return self._mollifier_scale() * np.sum(self.v_tilde(nx, ny) * DISK_WEIGHTS, axis=-1)

    def v_full(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.mollified(x, y) + self.quad_scale * (x * x + y * y)

    def gradient_full(self, x, y) -> np.ndarray:
        nx, ny = self._nodes(x, y)
        sub = self.v_tilde_subgradient(nx, ny)
        grad = self._mollifier_scale() * np.sum(sub * DISK_WEIGHTS[:, None], axis=-2)
        return grad + 2 * self.quad_scale * np.stack([np.asarray(x, float), np.asarray(y, float)], axis=-1)

    def as_oracle(self, record: bool = False) -> FirstOrderOracle:
        """First-order oracle of V_b on R²."""
        return FirstOrderOracle(
            lambda p: float(self.v_full(p[0], p[1])),
            lambda p: self.gradient_full(p[0], p[1]),
            2,
            batch_potential=lambda pts: self.v_full(pts[:, 0], pts[:, 1]),
            record=record,
        )


def phi(k: int, b: BitString, x: float, y: float) -> float:
    """(|y - [b]_k x| - (2^{-k} x + 2^{-(3N-k)}))_+."""
    if not 1 <= k <= b.N:
        raise UsageError(f"phi needs 1 <= k <= N, got k={k}, N={b.N}")
    return float(KakeyaPotential(b).phi_all(x, y)[..., k - 1])


def v_tilde(b: BitString, x, y, profile: Optional[KakeyaProfile] = None):
    return KakeyaPotential(b, profile or KakeyaProfile.full()).v_tilde(x, y)


def v_full(b: BitString, x, y, profile: Optional[KakeyaProfile] = None, normalized: Optional[bool] = None):
    return KakeyaPotential(b, profile or KakeyaProfile.full(), normalized).v_full(x, y)


def in_coincidence_region(b: BitString, ell: int, x, y, margin: Optional[int] = None, x_fraction: float = 0.25):
    """x < x_fraction·2^{-3N} or |y - [b]_ℓ x| > margin·2^{-ℓ}·x."""
    margin = settings.p3_margin if margin is None else margin
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pv = float(prefix_value(b, ell))
    return (x < x_fraction * 2.0 ** (-3 * b.N)) | (np.abs(y - pv * x) > margin * 2.0 ** -ell * x)


def in_mollified_region(b: BitString, ell: int, x, y):
    return in_coincidence_region(b, ell, x, y, margin=settings.leak_margin, x_fraction=0.125)


def induction_check(b: BitString, ell: int, k: int, x: float, y: float) -> Optional[bool]:
    """
    φ_k <= 2 φ_{k-1} at an admissible point.

    Returns None when the preconditions fail (k <= ℓ, k < 2, point outside
    the coincidence region of ℓ, or φ_k = 0). Below x = ¼·2^{-3N} the
    stronger φ_{k-1} >= φ_k is checked.
    """
    if k <= ell or k < 2 or k > b.N:
        return None
    if not bool(in_coincidence_region(b, ell, x, y)):
        return None
    phis = KakeyaPotential(b).phi_all(x, y)
    phi_k, phi_prev = float(phis[k - 1]), float(phis[k - 2])
    if phi_k <= 0:
        return None
    if x < 0.25 * 2.0 ** (-3 * b.N):
        return phi_prev >= phi_k
    return phi_k <= 2 * phi_prev


def _sector_bounds(b: BitString, half_width: float) -> Tuple[float, float]:
    center = float(prefix_value(b, b.N))
    return center - half_width, center + half_width


def _distance_to_ray(px, py, ux, uy, ox=0.0, oy=0.0):
    t = np.maximum((px - ox) * ux + (py - oy) * uy, 0.0)
    return np.hypot(px - ox - t * ux, py - oy - t * uy)


def _distance_to_segment(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    length2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / length2, 0.0, 1.0)
    return np.hypot(px - ax - t * dx, py - ay - t * dy)


def distance_to_zero_set(b: BitString, x, y):
    """Exact distance to the sector {x >= 0, |y/x - [b]| <= 2^{-N}}."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = _sector_bounds(b, 2.0 ** -b.N)
    inside = (x >= 0) & (y >= lo * x) & (y <= hi * x)
    d_lo = _distance_to_ray(x, y, 1 / math.hypot(1, lo), lo / math.hypot(1, lo))
    d_hi = _distance_to_ray(x, y, 1 / math.hypot(1, hi), hi / math.hypot(1, hi))
    return np.where(inside, 0.0, np.minimum(d_lo, d_hi))


def omega_bounds(b: BitString) -> Tuple[float, float, float]:
    """
    (x0, slope_lo, slope_hi) of Ω_b = {x >= 2^{-3N}, |y/x - [b]| <= 0.4·2^{-(N+2)}}.

    The half-width is 0.4 of the spacing 2^{-(N+2)} between consecutive [b],
    so the sectors of distinct strings are disjoint.
    """
    lo, hi = _sector_bounds(b, 0.4 * 2.0 ** -(b.N + 2))
    return 2.0 ** (-3 * b.N), lo, hi


def in_omega(b: BitString, x, y):
    x0, lo, hi = omega_bounds(b)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (x >= x0) & (y >= lo * x) & (y <= hi * x)


def distance_to_omega(b: BitString, x, y):
    x0, lo, hi = omega_bounds(b)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d_seg = _distance_to_segment(x, y, x0, lo * x0, x0, hi * x0)
    d_lo = _distance_to_ray(x, y, 1 / math.hypot(1, lo), lo / math.hypot(1, lo), x0, lo * x0)
    d_hi = _distance_to_ray(x, y, 1 / math.hypot(1, hi), hi / math.hypot(1, hi), x0, hi * x0)
    return np.where(in_omega(b, x, y), 0.0, np.minimum(d_seg, np.minimum(d_lo, d_hi)))


def min_distance_estimate(point: Tuple[float, float], candidates: Sequence[BitString]) -> BitString:
    """The candidate whose Ω_b is closest to the point (first on ties)."""
    if not candidates:
        raise UsageError("min_distance_estimate needs at least one candidate")
    distances = [float(distance_to_omega(c, point[0], point[1])) for c in candidates]
    return candidates[int(np.argmin(distances))]


def slope_candidates(slope: float, N: int) -> List[BitString]:
    """Strings whose [b] are the dyadic neighbours of a slope."""
    center = int(round(slope * 2 ** (N + 2)))
    values = sorted({min(max(v, 0), 2 ** N - 1) for v in (center - 1, center, center + 1)})
    return [BitString.from_int(v, N) for v in values]


# Polar quadrature for P_{V_b}(Ω_b)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def _panel_rule(edges: np.ndarray, level: int) -> Tuple[np.ndarray, np.ndarray]:
    edges = np.unique(edges)
    if level > 0:
        fine = [np.linspace(a, c, 2 ** level + 1)[:-1] for a, c in zip(edges[:-1], edges[1:])]
        edges = np.concatenate(fine + [edges[-1:]])
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    nodes = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    weights = (half[:, None] * _GL_WEIGHTS).ravel()
    return nodes, weights


def _graded(breakpoints: Sequence[float], lo: float, hi: float, finest: float = 1e-7, ratio: float = 3.0) -> np.ndarray:
    edges = [lo, hi]
    for bp in breakpoints:
        if not lo <= bp <= hi:
            continue
        edges.append(bp)
        step = finest
        while step < (hi - lo) / 8:
            edges.extend([bp - step, bp + step])
            step *= ratio
    edges = np.array(edges)
    return np.unique(edges[(edges >= lo) & (edges <= hi)])


def truncation_radius(potential: KakeyaPotential, level: float = 40.0) -> float:
    """Radius where the quadratic term alone reaches ``level``."""
    return math.sqrt(level / potential.quad_scale)


def polar_integral(fn, theta_edges: np.ndarray, r_edges: np.ndarray, level: int, chunk: int = 100_000) -> float:
    """∫∫ fn(x, y) r dr dθ with composite 6-point Gauss-Legendre panels."""
    thetas, w_theta = _panel_rule(theta_edges, level)
    radii, w_r = _panel_rule(r_edges, level)
    total = 0.0
    rr, tt = np.meshgrid(radii, thetas, indexing="ij")
    ww = np.outer(w_r * radii, w_theta)
    xs, ys, ws = (rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel(), ww.ravel()
    for start in range(0, len(xs), chunk):
        sl = slice(start, start + chunk)
        total += float(np.sum(fn(xs[sl], ys[sl]) * ws[sl]))
    return total


def omega_mass(b: BitString, profile: KakeyaProfile, max_level: int = 4, tol: float = 1e-3) -> float:
    """
    P_{V_b}(Ω_b) by polar quadrature of exp(-V_b).

    Panels are graded towards every ray where a hinge or the Ω_b indicator
    switches; all panels are halved until the relative change of the mass
    and of the normalizer is below ``tol``.

    Raises:
        UsageError: For the full profile (its exponents overflow the quadrature)
        NumericalError: If refinement does not converge by ``max_level``
    """
    if profile.name == "full":
        raise UsageError("omega_mass runs only with a reduced exponent profile")
    potential = KakeyaPotential(b, profile)
    radius = truncation_radius(potential)

    rays = [0.0]
    for k in range(1, b.N + 1):
        pv = float(prefix_value(b, k))
        rays.extend(math.atan(pv + s * 2.0 ** -k) for s in (-1, 0, 1))
    _, lo, hi = omega_bounds(b)
    rays.extend([math.atan(lo), math.atan(hi)])
    rays.extend([r + math.pi for r in rays if r + math.pi <= math.pi] + [r - math.pi for r in rays])
    theta_edges = _graded(rays, -math.pi, math.pi)

    sigma = math.sqrt(0.5 / potential.quad_scale)
    inner = 2.0 ** (-3 * b.N)
    r_edges = np.unique(np.concatenate([
        [0.0],
        inner * 2.0 ** np.arange(0, 60) if inner < 1 else [],
        np.linspace(0.0, radius, max(8, int(4 * radius / sigma)) + 1),
    ]))
    r_edges = r_edges[r_edges <= radius]
    r_edges = np.append(r_edges, radius) if r_edges[-1] < radius else r_edges

    def density(x, y):
        return np.exp(-potential.v_full(x, y))

    def omega_density(x, y):
        return density(x, y) * in_omega(b, x, y)

    previous = None
    for level in range(max_level + 1):
        total = polar_integral(density, theta_edges, r_edges, level)
        mass = polar_integral(omega_density, theta_edges, r_edges, level) / total
        if previous is not None:
            change = max(abs(mass - previous[0]) / max(mass, 1e-300), abs(total - previous[1]) / total)
            if change < tol:
                logger.info(f"omega_mass: b={b}, level={level}, mass={mass:.4f}")
                return mass
        previous = (mass, total)
    raise NumericalError(
        f"omega_mass did not converge for b={b} by level {max_level}",
        {"b": str(b), "mass": previous[0]},
    )


# Bit revelation

@dataclass
class LeakResponse:
    revealed: int
    prefix: Optional[Fraction]
    ell: Optional[int]
    capped: bool = False
    floored: bool = False
    informative: bool = True


def bit_leak_oracle(b: BitString, x: float, y: float, margin: Optional[int] = None) -> LeakResponse:
    """
    Reveal [b]_{min(ℓ+1, N)} for the largest ℓ in 0..64 with
    |y - [b]_ℓ x| <= margin·2^{-ℓ}·x.

    Queries with x < ⅛·2^{-3N} get an uninformative response. If no ℓ
    qualifies one bit is still revealed and the event is flagged.
    """
    margin = settings.leak_margin if margin is None else margin
    N = b.N
    if x < 0.125 * 2.0 ** (-3 * N):
        return LeakResponse(0, None, None, informative=False)
    ell = None
    for cand in range(0, 65):
        if abs(y - float(prefix_value(b, cand)) * x) <= margin * 2.0 ** -cand * x:
            ell = cand
    floored = ell is None
    wanted = 1 if floored else ell + 1
    revealed = min(wanted, N)
    return LeakResponse(
        revealed,
        prefix_value(b, revealed),
        ell,
        capped=wanted > N,
        floored=floored,
    )


def leakage_experiment(
    N: int,
    n_queries: int,
    strategy: LeakStrategy,
    trials: int,
    rng: np.random.Generator,
) -> LeakageReport:
    """
    Average number of newly revealed bits per query against bit_leak_oracle.

    random: x ~ U[2^{-3N}, 1], slope ~ U[-¼, ½], y = slope·x.
    bisection: query (1, [b̂]) for the currently known prefix b̂.

    After the queries the strategy's guess point (1, [b̂]) is decoded with
    the minimum-distance estimator; the report records how often it equals b.
    """
    strategy = LeakStrategy(strategy)
    histogram = [0] * (N + 1)
    per_query = np.zeros(max(n_queries, 0))
    cap_events = floor_events = no_info = identified = 0
    identify_queries: List[int] = []
    total_new = 0

    for _ in range(trials):
        b = BitString.from_int(int(rng.integers(0, 2 ** N)), N)
        known = 0
        prefix = Fraction(0)
        first_full = None
        for q in range(n_queries):
            if strategy == LeakStrategy.RANDOM:
                x = float(rng.uniform(2.0 ** (-3 * N), 1.0))
                y = float(rng.uniform(-0.25, 0.5)) * x
            else:
                x, y = 1.0, float(prefix)
            response = bit_leak_oracle(b, x, y)
            if not response.informative:
                no_info += 1
                histogram[0] += 1
                continue
            cap_events += int(response.capped)
            floor_events += int(response.floored)
            new = max(response.revealed - known, 0)
            if response.revealed > known:
                known, prefix = response.revealed, response.prefix
            histogram[new] += 1
            per_query[q] += new
            total_new += new
            if known == N and first_full is None:
                first_full = q + 1
        guess = min_distance_estimate((1.0, float(prefix)), slope_candidates(float(prefix), N))
        if guess == b:
            identified += 1
        if first_full is not None:
            identify_queries.append(first_full)

    denominator = trials * n_queries
    report = LeakageReport(
        N=N,
        strategy=strategy,
        trials=trials,
        queries=n_queries,
        avg_bits_per_query=(total_new / denominator) if denominator else 0.0,
        histogram=histogram,
        per_query_mean=(per_query / trials).tolist() if trials else [],
        cap_events=cap_events,
        floor_events=floor_events,
        no_information=no_info,
        identified_fraction=(identified / trials) if trials else 0.0,
        queries_to_identify_mean=float(np.mean(identify_queries)) if identify_queries else None,
    )
    if floor_events:
        logger.warning(f"leakage: {floor_events} floor events (no prefix within the margin)")
    logger.info(f"leakage: N={N}, {strategy.value}, avg bits/query = {report.avg_bits_per_query:.3f}")
    return report


# Figures

_LAYER_COLORS = ["#dcdcdc", "#a9a9a9", "#5a5a5a"]


def zero_set_layers(
    b: BitString,
    window: Tuple[float, float, float, float],
    resolution: int,
) -> np.ndarray:
    """
    Integer raster: cell value k means max_{j<=k} φ_j = 0 but φ_{k+1} > 0
    (N means inside the full zero set, 0 means outside Z_{<=1}).
    """
    x0, x1, y0, y1 = window
    xs = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
    ys = y0 + (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    phis = KakeyaPotential(b).phi_all(gx, gy)
    zero = np.cumprod(phis <= 0, axis=-1)
    return zero.sum(axis=-1)


def render_zero_sets(
    N: int,
    bits_list: Sequence[str],
    radii: Sequence[float],
    window: Tuple[float, float, float, float] = (-0.1, 1.1, -0.4, 0.8),
    resolution: int = 240,
) -> str:
    """
    Layered SVG of the zero sets for each bit string, shaded by scale k,
    with the circles of the given radii.
    """
    if N > 6:
        raise UsageError(f"render_zero_sets supports N <= 6, got {N}")
    strings = [BitString.parse(s) for s in bits_list]
    for s in strings:
        if s.N != N:
            raise UsageError(f"Bit string {s} has length {s.N}, expected {N}")
    x0, x1, y0, y1 = window
    size = 480
    cell = size / resolution
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for index, b in enumerate(strings):
        layers = zero_set_layers(b, window, resolution)
        parts.append(f'<g id="b{b}" opacity="{0.8 if len(strings) == 1 else 0.5}">')
        for k in range(1, N + 1):
            color = _LAYER_COLORS[min(2, (k - 1) * 3 // N)]
            mask = layers >= k
            parts.append(f'<g id="b{b}-k{k}" fill="{color}">')
            for row in range(resolution):
                cols = np.flatnonzero(mask[row])
                if cols.size == 0:
                    continue
                breaks = np.flatnonzero(np.diff(cols) > 1)
                starts = np.concatenate([[cols[0]], cols[breaks + 1]])
                ends = np.concatenate([cols[breaks], [cols[-1]]])
                top = size - (row + 1) * cell
                for s, e in zip(starts, ends):
                    parts.append(
                        f'<rect x="{s * cell:.2f}" y="{top:.2f}" width="{(e - s + 1) * cell:.2f}" height="{cell:.2f}"/>'
                    )
            parts.append("</g>")
        parts.append("</g>")

    cx = (0 - x0) / (x1 - x0) * size
    cy = size - (0 - y0) / (y1 - y0) * size
    for radius in radii:
        r_px = radius / (x1 - x0) * size
        parts.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r_px:.2f}" fill="none" stroke="black" stroke-dasharray="4 3"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def structural_sample(
    b: BitString,
    rng: np.random.Generator,
    count: int,
    scale: float = 2.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Points spread over many scales around the origin."""
    magnitude = scale * 10.0 ** rng.uniform(-3 * b.N * math.log10(2) - 1, 0, count)
    angle = rng.uniform(-math.pi, math.pi, count)
    return magnitude * np.cos(angle), magnitude * np.sin(angle)


def p1_points(b: BitString, rng: np.random.Generator, count: int, reach: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Points within 10³δ of the sector (full-profile δ)."""
    delta = 2.0 ** (-5 * b.N)
    lo, hi = _sector_bounds(b, 2.0 ** -b.N)
    x = reach * rng.random(count) ** 2
    y = rng.uniform(lo, hi, count) * x
    angle = rng.uniform(-math.pi, math.pi, count)
    shift = 1e3 * delta * rng.random(count)
    return x + shift * np.cos(angle), y + shift * np.sin(angle)


def check_structure(b: BitString, rng: np.random.Generator, points: int) -> Dict[str, int]:
    """
    Violation counts of convexity, flatness near the zero set, growth away
    from it and the induction inequality, under the full profile.
    """
    potential = KakeyaPotential(b)
    violations: Dict[str, int] = {}

    ax, ay = structural_sample(b, rng, points)
    bx, by = structural_sample(b, rng, points)
    va, vb = potential.v_tilde(ax, ay), potential.v_tilde(bx, by)
    vm = potential.v_tilde((ax + bx) / 2, (ay + by) / 2)
    violations["convexity"] = int(np.sum(vm > (va + vb) / 2 + 1e-9 * (1 + np.abs(va) + np.abs(vb))))

    px, py = p1_points(b, rng, points)
    violations["flat_near_zero_set"] = int(np.sum(potential.v_tilde(px, py) != 0))

    gx, gy = structural_sample(b, rng, points, scale=50.0)
    dist = distance_to_zero_set(b, gx, gy)
    lower = potential.kappa ** 4 * np.maximum(dist - 1, 0)
    violations["growth"] = int(np.sum(potential.v_tilde(gx, gy) < lower))

    bad = 0
    tested = 0
    while tested < points:
        ell = int(rng.integers(0, b.N))
        k = int(rng.integers(max(ell + 1, 2), b.N + 1)) if max(ell + 1, 2) <= b.N else None
        if k is None:
            continue
        x, y = structural_sample(b, rng, 1)
        result = induction_check(b, ell, k, float(x[0]), float(y[0]))
        if result is None:
            continue
        tested += 1
        bad += int(not result)
    violations["induction"] = bad
    return violations


def check_coincidence(N: int, rng: np.random.Generator, points: int, mollified: bool = False) -> Dict[str, int]:
    """
    For every pair sharing ℓ >= 1 leading bits, count points of the
    coincidence region where the two potentials differ.
    """
    strings = all_bitstrings(N)
    mismatches = 0
    checked = 0
    for i, b in enumerate(strings):
        for other in strings[i + 1:]:
            ell = b.common_prefix(other)
            if ell < 1:
                continue
            x, y = structural_sample(b, rng, 4 * points)
            region = in_mollified_region(b, ell, x, y) if mollified else in_coincidence_region(b, ell, x, y)
            x, y = x[region][:points], y[region][:points]
            if mollified:
                first, second = v_full(b, x, y), v_full(other, x, y)
                mismatches += int(np.sum(np.abs(first - second) > 1e-9 * (1 + np.abs(first))))
            else:
                mismatches += int(np.sum(v_tilde(b, x, y) != v_tilde(other, x, y)))
            checked += len(x)
    return {"pairs_points": checked, "mismatches": mismatches}
