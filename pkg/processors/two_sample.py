"""
Two-sample processor - energy-distance permutation test and binomial
confidence intervals used by the Monte-Carlo experiments.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist, squareform

from config import settings
from errors import UsageError
from models import TwoSampleResult

logger = logging.getLogger(__name__)


def _energy_from_blocks(D: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    V-statistic 2·mean(D_ab) - mean(D_aa) - mean(D_bb) for each column of a
    0/1 label matrix (1 marks sample A).
    """
    n_a = labels[:, 0].sum()
    n_b = labels.shape[0] - n_a
    other = 1.0 - labels
    DS = D @ labels
    within_a = np.einsum("ip,ip->p", labels, DS)
    cross = np.einsum("ip,ip->p", other, DS)
    within_b = np.einsum("ip,ip->p", other, D @ other)
    return 2.0 * cross / (n_a * n_b) - within_a / n_a ** 2 - within_b / n_b ** 2


def energy_test(
    A: np.ndarray,
    B: np.ndarray,
    permutations: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    chunk: int = 100,
) -> TwoSampleResult:
    """
    Energy-distance permutation test.

    Args:
        A: (n_a, p) summaries of the first sample
        B: (n_b, p) summaries of the second sample
        permutations: Number of label permutations (settings.permutations by default)
        rng: Generator driving the permutations

    Returns:
        TwoSampleResult with p-value (#{perm >= observed} + 1) / (P + 1)
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise UsageError(f"Summary lengths differ: {A.shape[1]} vs {B.shape[1]}")
    if len(A) < 1 or len(B) < 1:
        raise UsageError("Both samples need at least one row")
    P = settings.permutations if permutations is None else permutations
    rng = rng or np.random.default_rng(settings.seed)

    n_a, n_b = len(A), len(B)
    D = squareform(pdist(np.vstack([A, B])))
    base = np.zeros((n_a + n_b, 1))
    base[:n_a] = 1.0
    observed = float(_energy_from_blocks(D, base)[0])

    # ties with the observed value count as exceedances
    tol = 1e-12 * max(float(D.max()) if D.size else 0.0, 1.0)
    exceed = 0
    done = 0
    while done < P:
        size = min(chunk, P - done)
        labels = np.zeros((n_a + n_b, size))
        for j in range(size):
            labels[rng.permutation(n_a + n_b)[:n_a], j] = 1.0
        exceed += int(np.sum(_energy_from_blocks(D, labels) >= observed - tol))
        done += size

    p_value = (exceed + 1) / (P + 1)
    logger.info(f"energy_test: n_a={n_a}, n_b={n_b}, statistic={observed:.4e}, p={p_value:.3f}")
    return TwoSampleResult(statistic=observed, p_value=p_value, permutations=P, n_a=n_a, n_b=n_b)


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion; (0, 1) when trials = 0."""
    if trials <= 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + level / 2))
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def standardize_pair(A: np.ndarray, B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Center and scale both samples by the pooled per-feature mean and std."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    pooled = np.vstack([A, B])
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    std[std == 0] = 1.0
    return (A - mean) / std, (B - mean) / std
