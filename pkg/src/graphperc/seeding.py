"""Seed derivation and the random number generator contract.

Every random draw in the package comes from
``numpy.random.Generator(numpy.random.Philox(key=seed))`` where ``seed`` is
an unsigned 64-bit integer. Replica seeds are derived from a base seed with
the SplitMix64 finaliser::

    z = (base + (r + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    seed_r = z ^ (z >> 31)

so that replica ``r`` of a run is reproducible on its own, independent of
how many other replicas ran or in what order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix(base_seed: int, r: int) -> int:
    z = (int(base_seed) + (int(r) + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))
