"""Seed derivation: one root seed, independent substreams per (purpose, keys)."""
from __future__ import annotations

import numpy as np

SAMPLE = 0
ORACLE = 1
SCENARIO = 2
SHAPLEY = 3


def substream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    """Generator for ``(seed, purpose, *keys)``.

    Streams with different keys are statistically independent, so drawing
    from one never shifts another.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), *map(int, keys)))
    return np.random.Generator(np.random.PCG64(ss))
