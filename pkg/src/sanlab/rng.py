"""Seeded random streams on the Philox counter-based bit generator.

Philox is counter-based, so streams reproduce across platforms and
processes. Derived streams are spawned through SeedSequence keys rather
than by consuming draws from a parent generator.
"""

from __future__ import annotations

import numpy as np


def philox(seed: int, *key: int) -> np.random.Generator:
    """Generator for (seed, key...). Same arguments, same stream, always."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
