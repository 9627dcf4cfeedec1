"""Counter-based, splittable random numbers.

Every stream is a SplitMix64 sequence whose starting state is a hash of
(master_seed, *path). Draw ``k`` of a stream is ``mix64(key + (k + 1) * GOLDEN)``,
so any draw can be computed without the ones before it and results never
depend on thread scheduling or the platform's default generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG_53 = 1.0 / (1 << 53)
# below this many draws the pure-int path is faster; both paths are bit-identical
_SCALAR_CUTOFF = 16


def mix64_int(z: int) -> int:
    """SplitMix64 finalizer on a Python int (mod 2**64)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_key(master_seed: int, *path: int) -> int:
    """Hash a master seed and a path of non-negative indices into a stream key."""
    h = mix64_int(master_seed + GOLDEN)
    for p in path:
        if p < 0:
            raise ValueError(f"seed path components must be non-negative, got {p}")
        h = mix64_int(h ^ mix64_int(p + GOLDEN))
    return h


def derive_keys(master_seed: int, *path) -> np.ndarray:
    """Vectorized :func:`derive_key`; path components may be integer arrays (broadcast)."""
    h = np.uint64(mix64_int(master_seed + GOLDEN))
    g = np.uint64(GOLDEN)
    with np.errstate(over="ignore"):
        for p in path:
            p = np.asarray(p)
            if np.any(p < 0):
                raise ValueError("seed path components must be non-negative")
            h = mix64(h ^ mix64(p.astype(np.uint64) + g))
    return h


def uniforms_at(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Draw number ``counters`` (0-based) of every stream in ``keys``, broadcast together."""
    keys = np.asarray(keys, dtype=np.uint64)
    ks = np.asarray(counters, dtype=np.uint64) + np.uint64(1)
    with np.errstate(over="ignore"):
        raw = mix64(keys + ks * np.uint64(GOLDEN))
    return (raw >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53


class CounterRng:
    """One keyed stream. Only the draw counter is mutable."""

    def __init__(self, key: int):
        self.key = key & MASK64
        self.counter = 0

    def _raw(self, count: int) -> np.ndarray:
        start = self.counter
        self.counter += count
        if count <= _SCALAR_CUTOFF:
            key = self.key
            return np.array(
                [mix64_int(key + k * GOLDEN) for k in range(start + 1, start + count + 1)],
                dtype=np.uint64,
            )
        ks = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return mix64(np.uint64(self.key) + ks * np.uint64(GOLDEN))

    def random(self, size=None):
        """Uniform doubles in [0, 1) with 53 random bits each."""
        n = 1 if size is None else size if isinstance(size, int) else int(np.prod(size))
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53
        if size is None:
            return float(u[0])
        return u if isinstance(size, int) else u.reshape(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        u = self.random(size)
        return low + u * (high - low)

    def integers(self, low: int, high: int, size=None):
        """Integers in the closed range [low, high]."""
        if high < low:
            raise ValueError("high < low")
        span = high - low + 1
        u = self.random(size)
        if size is None:
            return low + min(int(u * span), span - 1)
        return low + np.minimum((u * span).astype(np.int64), span - 1)

    def normal(self, size=None):
        """Standard normals by Box-Muller (one pair of uniforms per value)."""
        n = 1 if size is None else int(np.prod(size))
        u = self.random(2 * n).reshape(2, n)
        z = np.sqrt(-2.0 * np.log1p(-u[0])) * np.cos(2.0 * np.pi * u[1])
        return float(z[0]) if size is None else z.reshape(size)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.random(n), kind="stable")

    def spawn(self, *path: int) -> "CounterRng":
        return CounterRng(derive_key(self.key, *path))


@dataclass(frozen=True)
class SeedPolicy:
    """Derives an independent stream per (sample, view, stage, channel) key."""

    master_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")

    def rng(self, *path: int) -> CounterRng:
        return CounterRng(derive_key(self.master_seed, *path))
