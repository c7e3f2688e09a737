"""Counter-based derivation of child seeds from one master seed.

A child seed is the first 64-bit word produced by
``numpy.random.SeedSequence(master, spawn_key=keys)``.  The value depends only
on ``(master, keys)``, so a sweep cell or Monte Carlo run gets the same stream
whether it is executed serially, in parallel, or on its own.
"""

import numpy as np


def child_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    if not keys:
        return np.random.default_rng(int(seed))
    return np.random.default_rng(child_seed(seed, *keys))
