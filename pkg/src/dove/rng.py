"""Deterministic counter-based pseudo-random streams.

Every random draw in the engine (parameter init, synthetic data, batch
shuffling) comes from a splitmix64 stream.  Output ``i`` of a stream with
seed ``s`` is ``mix64(s + (i + 1) * GOLDEN)`` where ``mix64`` is the
standard splitmix64 finalizer.  Because the generator is counter-based,
a draw is a pure function of (seed, counter): streams vectorize cleanly,
never share state, and produce identical bytes on every platform.
"""
from __future__ import annotations

import numpy as np

PRNG_NAME = "splitmix64"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer, vectorized over uint64 arrays; wraparound is
    # the point, so the overflow warning is silenced
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK
    return h


def derive_seed(seed: int, *labels: object) -> int:
    """Stable sub-seed for a named stream, e.g. derive_seed(s, "msv")."""
    acc = np.uint64(seed & _MASK)
    for label in labels:
        mixed = (int(acc) ^ _fnv1a64(str(label)))
        acc = _mix64(np.uint64((mixed + 0x9E3779B97F4A7C15) & _MASK))
    return int(acc)


class RngStream:
    """A single splitmix64 stream addressed by (seed, counter)."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = seed & _MASK
        self.counter = counter

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` uint64 words."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix64(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """``n`` float64 draws from U[lo, hi)."""
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return lo + (hi - lo) * u

    def integers(self, n: int, bound: int) -> np.ndarray:
        """``n`` integers in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.uniform(n) * bound).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        order = np.arange(n, dtype=np.int64)
        if n <= 1:
            return order
        picks = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(picks[n - 1 - i] * (i + 1))
            order[i], order[j] = order[j], order[i]
        return order
