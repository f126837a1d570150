"""Seeded xoshiro256++ generator.

The stream is fully specified so that runs are reproducible byte-for-byte across
machines: the 256-bit state is filled by successive splitmix64 outputs of the
seed, doubles take the top 53 bits of a draw, and Gaussians come from the
Box-Muller transform with the second variate of each pair cached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / float(1 << 53)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64(state: int) -> Tuple[int, int]:
    """Return (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


@dataclass(frozen=True)
class PrngState:
    words: Tuple[int, int, int, int]
    cached_gaussian: float | None = None


class Xoshiro256pp:
    def __init__(self, seed: int) -> None:
        sm = seed & MASK64
        words: List[int] = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            words.append(out)
        self._s = words
        self._cached: float | None = None

    @classmethod
    def from_state(cls, state: PrngState) -> "Xoshiro256pp":
        rng = cls(0)
        rng.set_state(state)
        return rng

    def get_state(self) -> PrngState:
        s = self._s
        return PrngState((s[0], s[1], s[2], s[3]), self._cached)

    def set_state(self, state: PrngState) -> None:
        if not any(state.words):
            raise ValueError("xoshiro256++ state must not be all zero")
        self._s = [w & MASK64 for w in state.words]
        self._cached = state.cached_gaussian

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & MASK64, 23) + s[0]) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Double in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def below(self, n: int) -> int:
        """Integer in [0, n) by multiply-shift."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return (self.next_u64() * n) >> 64

    def gaussian(self) -> float:
        if self._cached is not None:
            z, self._cached = self._cached, None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1], keeps log finite
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._cached = r * math.sin(_TWO_PI * u2)
        return r * math.cos(_TWO_PI * u2)

    def gaussians(self, n: int) -> np.ndarray:
        return np.array([self.gaussian() for _ in range(n)], dtype=np.float64)

    def uniforms(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        span = high - low
        return np.array([low + span * self.uniform() for _ in range(n)], dtype=np.float64)

    def permutation(self, n: int) -> List[int]:
        """Fisher-Yates shuffle of range(n)."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order
