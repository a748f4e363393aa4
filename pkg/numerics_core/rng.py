"""Deterministic seeded random source shared by all experiments.

The generator is SplitMix64: a 64-bit Weyl sequence (increment
``0x9E3779B97F4A7C15``) passed through the finalizer

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

with all arithmetic modulo 2**64. It is implemented on Python integers, so a
given seed produces the same stream on every platform. Golden values for
seed 42 are kept in ``GOLDEN_SEED_42`` and checked by the test suite.

Derived draws:

* ``random()``: top 53 bits of the next word scaled by 2**-53, in [0, 1).
* ``uniform()``: ``low + (high - low) * random()``.
* ``normal()``: Box-Muller on two consecutive ``random()`` draws
  (cosine branch only, so every normal consumes exactly two words).

Children for concurrent workers are seeded with
``mix64(parent_seed ^ mix64(index + 1))`` where ``mix64`` is the finalizer
above applied to its argument plus the Weyl increment.
"""
from __future__ import annotations

import math
import typing as t

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# First four outputs of SeededRng(42).next_u64().
GOLDEN_SEED_42 = (
    0xBDD732262FEB6E95,
    0x28EFE333B266F103,
    0x47526757130F9F52,
    0x581CE1FF0E4AE394,
)


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(value: int) -> int:
    """Hash a 64-bit value with one SplitMix64 step."""
    return _finalize((value + GOLDEN_GAMMA) & MASK64)


def child_seed(parent_seed: int, index: int) -> int:
    """Seed of the ``index``-th child of a generator seeded with ``parent_seed``."""
    return mix64((parent_seed & MASK64) ^ mix64(index + 1))


class SeededRng:
    """Single-owner SplitMix64 stream.

    Not safe for concurrent use; hand each worker its own ``spawn(i)`` child.
    """

    def __init__(self, seed: int) -> None:
        if seed < 0:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed & MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        return _finalize(self._state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(
            self,
            low: float = 0.0,
            high: float = 1.0,
            size: t.Optional[int | tuple[int, ...]] = None,
    ) -> t.Any:
        """Uniform draws on [low, high); a float when ``size`` is None."""
        if size is None:
            return low + (high - low) * self.random()
        count = int(np.prod(size))
        values = np.array([self.random() for _ in range(count)], dtype=np.float64)
        return (low + (high - low) * values).reshape(size)

    def normal(self, size: t.Optional[int | tuple[int, ...]] = None) -> t.Any:
        """Standard normal draws; a float when ``size`` is None."""
        if size is None:
            return self._normal()
        count = int(np.prod(size))
        return np.array([self._normal() for _ in range(count)], dtype=np.float64).reshape(size)

    def _normal(self) -> float:
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def spawn(self, index: int) -> "SeededRng":
        """Independent child generator for worker ``index``."""
        return SeededRng(child_seed(self.seed, index))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"
