"""
Per-path random streams.

Every path owns a generator seeded by (seed, path index), so a path sees
the same numbers whether it runs alone, in a batch or on another worker.
Draws are buffered in blocks per path.
"""

from typing import Iterable

import numpy as np

from .errors import DomainError

MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    if not 0 <= int(seed) <= MAX_SEED:
        raise DomainError(f"Seed must be an unsigned 64-bit integer, got {seed}.")
    return int(seed)


class PathStreams:
    def __init__(self, seed: int, path_indices: Iterable[int], width: int = 2, block: int = 64, kind: str = "uniform"):
        if kind not in ("uniform", "normal"):
            raise DomainError(f"Unknown stream kind '{kind}'.")
        seed = check_seed(seed)
        self.path_indices = np.asarray(list(path_indices), dtype=np.int64)
        self.width = width
        self.block = block
        self.kind = kind
        self._generators = [np.random.default_rng([seed, int(i)]) for i in self.path_indices]
        self._buffer = np.empty((len(self._generators), block, width))
        self._cursor = np.full(len(self._generators), block, dtype=np.int64)

    def __len__(self) -> int:
        return len(self._generators)

    def _refill(self, lane: int):
        gen = self._generators[lane]
        shape = (self.block, self.width)
        self._buffer[lane] = gen.random(shape) if self.kind == "uniform" else gen.standard_normal(shape)
        self._cursor[lane] = 0

    def draw(self, lanes: np.ndarray) -> np.ndarray:
        """Next ``width`` numbers for each lane in ``lanes``; shape (len(lanes), width)."""
        lanes = np.asarray(lanes, dtype=np.int64)
        for lane in lanes[self._cursor[lanes] >= self.block]:
            self._refill(int(lane))
        out = self._buffer[lanes, self._cursor[lanes]]
        self._cursor[lanes] += 1
        return out
