"""
Query oracle processor - query-counting access to potentials and matrices.

Every algorithm in the lab touches its instance only through one of these
oracles, so the counters are the cost measure of every experiment.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np

from config import settings
from errors import ContractViolation, OracleError

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass
class QueryRecord:
    index: int
    point: np.ndarray
    response: Tuple


@dataclass
class QueryLog:
    """Eagerly recorded (query, response) pairs, capped in length."""
    cap: int = field(default_factory=lambda: settings.transcript_cap)
    records: List[QueryRecord] = field(default_factory=list)

    def append(self, point: np.ndarray, response: Tuple) -> None:
        if len(self.records) >= self.cap:
            raise ContractViolation(
                f"Query log exceeded its cap of {self.cap} records",
                {"cap": self.cap},
            )
        self.records.append(QueryRecord(len(self.records), np.array(point, copy=True), response))

    def __len__(self) -> int:
        return len(self.records)


class _CountingOracle:
    def __init__(self, dimension: int, record: bool, white_box: Optional[np.ndarray]):
        if dimension < 1:
            raise OracleError(f"Oracle dimension must be positive, got {dimension}")
        self.dimension = int(dimension)
        self.query_count = 0
        self.log: Optional[QueryLog] = QueryLog() if record else None
        self._white_box = white_box

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dimension:
            raise OracleError(
                f"Query of dimension {x.shape[0]} sent to a {self.dimension}-dimensional oracle"
            )
        return x

    @property
    def hidden_matrix(self) -> np.ndarray:
        """The instance matrix, available only to oracles built for white-box tests."""
        if self._white_box is None:
            raise OracleError("This oracle does not expose its instance")
        return self._white_box


class FirstOrderOracle(_CountingOracle):
    """
    Returns (V(x), ∇V(x)) per query.

    ``batch_potential`` / ``batch_gradient`` evaluate row-stacked points; when
    given, evaluate_many charges one query per row without a Python loop.
    """

    def __init__(
        self,
        potential: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        dimension: int,
        batch_potential: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        record: bool = True,
        white_box: Optional[np.ndarray] = None,
    ):
        super().__init__(dimension, record, white_box)
        self.potential = potential
        self.gradient = gradient
        self.batch_potential = batch_potential

    def evaluate(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        x = self._check_point(x)
        value = float(self.potential(x))
        grad = np.asarray(self.gradient(x), dtype=float)
        self.query_count += 1
        if self.log is not None:
            self.log.append(x, (value, grad))
        return value, grad

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Potential values at each row of ``points``; one query per row."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dimension:
            raise OracleError(
                f"Query of dimension {points.shape[1]} sent to a {self.dimension}-dimensional oracle"
            )
        if self.batch_potential is not None and self.log is None:
            values = np.asarray(self.batch_potential(points), dtype=float)
            self.query_count += points.shape[0]
            return values
        return np.array([self.evaluate(p)[0] for p in points])


class MatVecOracle(_CountingOracle):
    """Returns Λv per query; a (d, b) block of columns costs b queries."""

    def __init__(
        self,
        matvec: Callable[[np.ndarray], np.ndarray],
        dimension: int,
        record: bool = False,
        white_box: Optional[np.ndarray] = None,
    ):
        super().__init__(dimension, record, white_box)
        self._matvec = matvec

    def query(self, v: np.ndarray) -> np.ndarray:
        v = self._check_point(v)
        out = np.asarray(self._matvec(v), dtype=float)
        self.query_count += 1 if v.ndim == 1 else v.shape[1]
        if self.log is not None:
            self.log.append(v, (out,))
        return out


def _check_spd(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise OracleError(f"Expected a square matrix, got shape {matrix.shape}")
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    asym = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asym > 1e-10 * scale:
        raise OracleError(
            f"Matrix is not symmetric: max|Λ-Λᵀ| = {asym:.3e}",
            {"asymmetry": asym, "scale": scale},
        )
    lam_min = float(np.linalg.eigvalsh(matrix)[0])
    if lam_min <= 0:
        raise OracleError(f"Matrix is not positive definite: λ_min = {lam_min:.3e}")
    return matrix


def make_quadratic_oracle(
    matrix: np.ndarray,
    record: bool = True,
    white_box: bool = False,
) -> FirstOrderOracle:
    """
    Build the first-order oracle of V(x) = ½ xᵀΛx.

    Args:
        matrix: Symmetric positive-definite Λ
        record: Keep a QueryLog of every query
        white_box: Let tests read the matrix back via hidden_matrix

    Returns:
        FirstOrderOracle with query_count 0

    Raises:
        OracleError: If Λ is not symmetric or not positive definite
    """
    lam = _check_spd(matrix)

    def potential(x: np.ndarray) -> float:
        return 0.5 * float(x @ lam @ x)

    def gradient(x: np.ndarray) -> np.ndarray:
        return lam @ x

    def batch_potential(points: np.ndarray) -> np.ndarray:
        return 0.5 * np.einsum("ij,jk,ik->i", points, lam, points)

    return FirstOrderOracle(
        potential,
        gradient,
        lam.shape[0],
        batch_potential=batch_potential,
        record=record,
        white_box=lam if white_box else None,
    )


def make_matvec_oracle(matrix: np.ndarray, white_box: bool = False) -> MatVecOracle:
    """Matrix-vector oracle for a symmetric positive-definite Λ."""
    lam = _check_spd(matrix)
    return MatVecOracle(lambda v: lam @ v, lam.shape[0], white_box=lam if white_box else None)


@dataclass(frozen=True)
class ExtendedIndexSet:
    """H_k = {(i, j) : i + j ≤ k + 1, i ≥ 0, 1 ≤ j ≤ k}, in enumeration order."""
    k: int
    pairs: Tuple[Pair, ...]

    def __contains__(self, pair: object) -> bool:
        if not isinstance(pair, tuple) or len(pair) != 2:
            return False
        i, j = pair
        return i >= 0 and 1 <= j <= self.k and i + j <= self.k + 1

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def _ordered_pairs() -> Iterator[Pair]:
    # v_1, Λv_1, v_2, Λ²v_1, Λv_2, v_3, ...
    total = 1
    while True:
        for j in range(1, total + 1):
            yield total - j, j
        total += 1


def extended_index_set(k: int) -> ExtendedIndexSet:
    """
    Enumerate H_k sorted by i + j, then by j.

    Raises:
        ValueError: If k < 1
    """
    if k < 1:
        raise ValueError(f"Extended index set needs k >= 1, got {k}")
    pairs = []
    for i, j in _ordered_pairs():
        if i + j > k + 1:
            break
        if j <= k:
            pairs.append((i, j))
    return ExtendedIndexSet(k, tuple(pairs))


def enumeration_order(m: int) -> List[Pair]:
    """First m pairs of the order v_1, Λv_1, v_2, Λ²v_1, Λv_2, v_3, ..."""
    if m < 1:
        raise ValueError(f"Enumeration length must be positive, got {m}")
    out: List[Pair] = []
    for pair in _ordered_pairs():
        out.append(pair)
        if len(out) == m:
            return out
    return out
