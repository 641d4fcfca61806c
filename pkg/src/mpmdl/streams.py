"""Reproducible random streams keyed by integer tuples.

Every stochastic step draws from a stream derived from ``(seed, *keys)``
so results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import random

import numpy as np

INIT, MATING, DECODE, VARY, SWARM = range(5)


def derive_rng(seed: int, *keys: int) -> random.Random:
    state = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(int(k) for k in keys)]).generate_state(2)
    return random.Random(int(state[0]) << 32 | int(state[1]))
