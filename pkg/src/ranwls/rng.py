"""Seeded random streams.

Replication ``r`` of an experiment with base seed ``s`` draws from
``SeedSequence(entropy=s, spawn_key=(purpose, r))`` fed to PCG64. The spawn
key is hashed into the generator state by numpy, so sub-streams are
disjoint for practical purposes and independent of execution order.
"""

from __future__ import annotations

import numpy as np

# spawn-key purposes, kept distinct so that helper draws never alias replications
REPLICATION = 0
TEST_FUNCTIONS = 1
ADHOC = 2


def make_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def substream(seed: int, r: int, purpose: int = REPLICATION) -> np.random.Generator:
    """Generator for replication ``r`` derived from ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), int(r)))
    return np.random.Generator(np.random.PCG64(ss))


def as_stream(stream) -> np.random.Generator:
    """Accepts a Generator or an integer seed."""
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, (int, np.integer)) and not isinstance(stream, bool):
        return make_stream(int(stream))
    raise TypeError(f"expected a numpy Generator or an integer seed, got {type(stream).__name__}")
