"""Counter-derived random streams.

A :class:`SeededStream` is an immutable (seed, key) pair. Every consumer that
needs randomness derives a child stream with :meth:`SeededStream.substream`
and a fresh generator from it, so the numbers a replicate block sees depend
only on its key path and never on scheduling or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SEED = 0xC0FFEE


@dataclass(frozen=True)
class SeededStream:
    seed: int = DEFAULT_SEED
    key: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def substream(self, *keys: int) -> "SeededStream":
        return SeededStream(self.seed, self.key + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def as_stream(stream: SeededStream | int | None) -> SeededStream:
    if stream is None:
        return SeededStream()
    if isinstance(stream, SeededStream):
        return stream
    return SeededStream(int(stream))
