"""Deterministic random substreams keyed by integer tuples."""

from __future__ import annotations

import zlib

import numpy as np

# roles within a round
ACQUIRE = 0
SIMULATE = 1
RETRY = 2
HYPER = 3
POOL_PARAMS = 4
POOL_SIM = 5
OBSERVED = 6


def name_key(name: str) -> int:
    """Stable integer key for a parameter name."""
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def subseed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
