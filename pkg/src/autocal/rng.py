"""Seedable, splittable random streams.

Every random quantity in the package is drawn from a ``PCG64DXSM`` bit
generator seeded through :class:`numpy.random.SeedSequence`.  A stream is
addressed by ``(root seed, *path)``; the path is a tuple of small integers
(test tag, chunk index, replication index...).  Because the address alone
fixes the stream, results never depend on how work is split across threads.
"""

from __future__ import annotations

import secrets

import numpy as np

BIT_GENERATOR = "PCG64DXSM"
GAUSSIAN_METHOD = "ziggurat"  # numpy Generator.standard_normal
SPLIT_METHOD = "SeedSequence(spawn_key=path)"

_MASK64 = (1 << 64) - 1


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def fresh_seed() -> int:
    """A random 63-bit seed, for callers that did not supply one."""
    return secrets.randbits(63)


def stream(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64DXSM(ss))


def derive_seed(seed: int, *path: int) -> int:
    """A child 64-bit seed, stable across releases for a given path."""
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_metadata(seed: int) -> dict:
    return {
        "seed": int(seed),
        "bit_generator": BIT_GENERATOR,
        "gaussian": GAUSSIAN_METHOD,
        "split": SPLIT_METHOD,
    }
