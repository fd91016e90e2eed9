"""Seed handling: every random draw in liqsim comes from a (seed, stream) pair."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = 2**64


@dataclass(frozen=True)
class RngSeed:
    """A 64-bit seed plus a stream id for per-worker derivation.

    Identical ``(seed, stream)`` pairs always yield identical generators.
    Extra integers passed to :meth:`generator` derive further independent
    substreams (for example one per stage or per path block).
    """

    seed: int
    stream: int = 0
    path: tuple = ()

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")

    def generator(self, *substream: int) -> np.random.Generator:
        key = (int(self.stream), len(self.path), *self.path, *map(int, substream))
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=key))

    def child(self, *index: int) -> "RngSeed":
        """Seed for an independent sub-task; children never share streams."""
        return RngSeed(self.seed, self.stream, self.path + tuple(map(int, index)))

    def with_stream(self, stream: int) -> "RngSeed":
        return RngSeed(self.seed, stream, self.path)


def as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngSeed or a bare integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return as_seed(rng).generator()
