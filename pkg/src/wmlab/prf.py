"""Deterministic pseudorandom values from hashed integer inputs.

All keyed randomness in this package bottoms out here: a fixed 64-bit
mixing function maps (seed, values...) to a derived key, and derived keys
seed numpy generators for vectors, permutations and uniforms.  Everything
is reproducible bit-for-bit across runs given the same integer inputs.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Token id used to left-pad key-derivation windows at sequence start.
# Deliberately far outside any toy vocabulary.
PAD_TOKEN = (1 << 32) - 1


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(seed: int, *values: int) -> int:
    """Hash ``seed`` and any number of integer values into a 64-bit key.

    The chain is order-sensitive: mix64(s, a, b) != mix64(s, b, a).
    """
    h = splitmix64(seed & _MASK64)
    for v in values:
        h = splitmix64(h ^ (v & _MASK64))
    return h


def key_rng(key: int) -> np.random.Generator:
    """A fresh numpy generator seeded by a derived key."""
    return np.random.default_rng(key & _MASK64)


def uniform_vector(key: int, size: int) -> np.ndarray:
    """Key-determined vector of uniforms in [0, 1)."""
    return key_rng(key).random(size)
