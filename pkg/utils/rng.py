"""
Deterministic random streams.

A stream is identified by a root seed and a path of non-negative integers.
The state is derived as ``SeedSequence(root, spawn_key=path)`` feeding a
counter-based Philox generator, so sibling paths give independent streams and
the derivation is pure.
"""
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A named position in the stream tree."""
    root: int
    path: Tuple[int, ...] = field(default_factory=tuple)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.root, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.root, self.path + tuple(int(i) for i in indices))


def derive_stream(root: int, path: Sequence[int] = ()) -> RngStream:
    """
    Derive the stream for (root, path).

    Args:
        root: 64-bit root seed
        path: Sequence of non-negative integers; empty means the root stream

    Returns:
        RngStream whose generator() is reproducible across calls
    """
    if root < 0:
        raise ValueError(f"Root seed must be non-negative, got {root}")
    if any(int(p) < 0 for p in path):
        raise ValueError(f"Stream path entries must be non-negative: {list(path)}")
    return RngStream(int(root), tuple(int(p) for p in path))


def trial_generator(root: int, *path: int) -> np.random.Generator:
    """Shorthand for derive_stream(root, path).generator()."""
    return derive_stream(root, path).generator()
