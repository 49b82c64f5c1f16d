"""Deterministic, counter-based derivation of random generators.

Every stochastic routine in the package takes either an integer seed or an
already-constructed generator.  Experiment code derives one generator per
(process index, stage) pair from a single master seed, so results do not
depend on scheduling or execution order.
"""

from __future__ import annotations

import numpy as np

# Stage tags used by the experiment harness when splitting a master seed.
STAGE_TRUTH = 0
STAGE_TRAIN = 1
STAGE_TEST = 2
STAGE_MC = 4
STAGE_RADEMACHER = 5


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by ``(master_seed, *key)``.

    Distinct keys give statistically independent streams; the same key always
    reproduces the same stream.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(seed_or_rng: int | np.random.Generator) -> np.random.Generator:
    """Coerce an integer seed (or a generator) into a generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return derive_rng(int(seed_or_rng))
