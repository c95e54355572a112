"""Deterministic randomness primitives: FNV-1a 64-bit and SplitMix64.

These are the only randomness sources in the mock backend. Both are
fixed-constant integer recurrences of a few lines, so the exact scalar
streams can be reproduced in any language.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a_64(data: bytes) -> int:
    """FNV-1a hash of a byte string, reduced mod 2**64."""
    h = FNV_OFFSET_BASIS
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


class SplitMix64:
    """64-bit SplitMix generator (Steele/Lea/Flood mixing constants)."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        """Uniform draw in [-1, 1): top 53 bits mapped through 2*u - 1."""
        return (self.next_u64() >> 11) * 2.0**-53 * 2.0 - 1.0

    def fill(self, count: int) -> np.ndarray:
        """`count` uniform [-1, 1) draws as a float32 vector, in stream order."""
        out = np.empty(count, dtype=np.float64)
        for i in range(count):
            out[i] = self.next_unit()
        return out.astype(np.float32)


def uniform_tensor(seed: int, shape: tuple[int, ...]) -> np.ndarray:
    """Row-major float32 tensor of uniform [-1, 1) draws from SplitMix64(seed)."""
    n = 1
    for extent in shape:
        n *= extent
    return SplitMix64(seed).fill(n).reshape(shape)
