"""
Ordered trial map.

Each trial gets its own generator from derive_stream(root, path + (i,)),
so results do not depend on the number of worker threads.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from config import settings
from utils.rng import derive_stream

logger = logging.getLogger(__name__)

T = TypeVar("T")


def map_trials(
    fn: Callable[[int, np.random.Generator], T],
    trials: int,
    root: int,
    path: Sequence[int] = (),
    threads: Optional[int] = None,
) -> List[T]:
    """
    Run fn(i, rng_i) for i in range(trials) and return results by trial index.

    Args:
        fn: Trial body; must only touch its own generator
        trials: Number of trials
        root: Root seed
        path: Stream path prefix of this experiment
        threads: Worker count (settings.threads by default)
    """
    if trials <= 0:
        return []
    workers = max(1, min(threads or settings.threads, trials))

    def run(i: int) -> T:
        return fn(i, derive_stream(root, tuple(path) + (i,)).generator())

    if workers == 1:
        return [run(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(run, range(trials)))
    logger.debug(f"map_trials: {trials} trials on {workers} threads")
    return results
