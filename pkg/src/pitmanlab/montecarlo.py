"""Block-structured Monte Carlo with jackknife errors.

Replications are cut into a fixed number of blocks. Block ``b`` draws from
``stream.substream(b)`` and is reduced to exact-order sums (``math.fsum``) of
the per-replicate quantities and their pairwise products. Results are stored by
block index, so the final numbers do not depend on how many workers ran the
blocks or in which order they finished.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rng import SeededStream

DEFAULT_BLOCKS = 100
Z95 = 1.959963984540054


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("PITMANLAB_WORKERS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BlockSums:
    """Per-block counts, first sums ``(B, d)`` and cross sums ``(B, d, d)``."""

    count: np.ndarray
    s1: np.ndarray
    s2: np.ndarray

    @property
    def blocks(self) -> int:
        return len(self.count)

    @property
    def dim(self) -> int:
        return self.s1.shape[1]

    def totals(self, drop: int | None = None):
        """Sums over all blocks, or over all but block ``drop``.

        Full totals use ``math.fsum``; leave-one-out totals subtract the
        dropped block, which is deterministic because block order is fixed.
        """
        n = float(self.count.sum())
        s1 = np.array([math.fsum(self.s1[:, i]) for i in range(self.dim)])
        s2 = np.array([[math.fsum(self.s2[:, i, j]) for j in range(self.dim)] for i in range(self.dim)])
        if drop is None:
            return n, s1, s2
        return n - float(self.count[drop]), s1 - self.s1[drop], s2 - self.s2[drop]


def _reduce(values: np.ndarray):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    d = values.shape[1]
    s1 = np.array([math.fsum(values[:, i]) for i in range(d)])
    s2 = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            s2[i, j] = s2[j, i] = math.fsum(values[:, i] * values[:, j])
    return len(values), s1, s2


def block_sizes(reps: int, blocks: int = DEFAULT_BLOCKS) -> list[int]:
    blocks = min(blocks, reps)
    base, extra = divmod(reps, blocks)
    return [base + (b < extra) for b in range(blocks)]


def collect(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    reps: int,
    stream: SeededStream,
    blocks: int = DEFAULT_BLOCKS,
    workers: int | None = None,
) -> BlockSums:
    """Run ``fn(rng, count)`` per block; ``fn`` returns ``(count, d)`` values."""
    sizes = block_sizes(int(reps), blocks)

    def run(b):
        out = fn(stream.substream(b).generator(), sizes[b])
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite replicate in block {b}")
        return _reduce(out)

    nw = worker_count(workers)
    if nw == 1:
        results = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(run, range(len(sizes))))
    return BlockSums(
        np.array([r[0] for r in results]),
        np.stack([r[1] for r in results]),
        np.stack([r[2] for r in results]),
    )


def covariance_from(n: float, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance from sums."""
    mean = s1 / n
    return (s2 - n * np.outer(mean, mean)) / (n - 1)


def jackknife(sums: BlockSums, stat: Callable) -> tuple:
    """Point value of ``stat(n, s1, s2)`` and its delete-one-block jackknife error."""
    n, s1, s2 = sums.totals()
    full = np.asarray(stat(n, s1, s2), dtype=float)
    b = sums.blocks
    if b < 2:
        return full, np.full(full.shape, np.inf)
    loo = np.stack(
        [np.asarray(stat(n - float(sums.count[k]), s1 - sums.s1[k], s2 - sums.s2[k]), dtype=float) for k in range(b)]
    )
    centre = loo.mean(axis=0)
    se = np.sqrt((b - 1) / b * ((loo - centre) ** 2).sum(axis=0))
    return full, se


def variance_stat(i: int = 0) -> Callable:
    return lambda n, s1, s2: covariance_from(n, s1, s2)[i, i]


def mean_stat(i: int = 0) -> Callable:
    return lambda n, s1, s2: s1[i] / n
