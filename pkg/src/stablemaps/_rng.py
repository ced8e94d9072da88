"""Seedable counter-based random streams.

Every random object in the package is drawn from a Philox generator keyed by
``(seed, stream)``, so a sample can be replayed from those two integers alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream: int) -> "RngStream":
        # streams are flat: (seed, stream) pairs, never nested
        return RngStream(self.seed, stream)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return RngStream(seed, stream).generator()


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return make_rng(0 if rng is None else int(rng))
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")
