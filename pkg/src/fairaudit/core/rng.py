"""
Seeded random streams.

All randomness in fairaudit flows through PCG64 generators seeded by a
``SeedSequence``. A stream is addressed by ``(seed, *key)`` where ``key`` is a
tuple of small non-negative integers; stream ``(seed, i)`` is the i-th child
that ``SeedSequence(seed).spawn`` would produce, so the same key always yields
the same numbers on every platform numpy supports.
"""

import numpy as np

from fairaudit.core.errors import ConfigError


MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    """Validate that a seed is a non-negative 64-bit integer."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"Seed must be an integer, got {type(seed).__name__}", field="seed")
    if seed < 0 or seed > MAX_SEED:
        raise ConfigError(f"Seed must be in [0, 2**64), got {seed}", field="seed")
    return int(seed)


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a plain integer seed for stream ``key``, for handing to sub-operations."""
    state = seed_sequence(seed, *key).generate_state(1, dtype=np.uint64)
    return int(state[0])
