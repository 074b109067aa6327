"""Deterministic pseudo-random numbers from a pinned SplitMix64 stream.

Every random decision in the package (weight init, dropout masks, batch
shuffling, synthetic corpus generation, sampling) draws from this generator
so that a 64-bit seed fully determines the run.  The algorithm is SplitMix64
(Steele, Lea & Flood's mix function):

    state   <- state + 0x9E3779B97F4A7C15            (mod 2^64, per draw)
    z       <- state
    z       <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9
    z       <- (z XOR (z >> 27)) * 0x94D049BB133111EB
    output  <- z XOR (z >> 31)

Uniform doubles take the top 53 bits: u = (output >> 11) * 2^-53, giving
values in [0, 1).  Normals use the Box-Muller transform on consecutive
uniform pairs.  Bounded integers use `output mod n` (the modulo bias is
below 2^-53 for every n used here and is accepted for simplicity).
"""

from __future__ import annotations

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wraparound arithmetic)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


class Rng:
    """Stateful SplitMix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK

    def clone(self) -> "Rng":
        c = Rng(0)
        c._state = self._state
        return c

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return int(_mix(np.uint64(self._state)))

    def _raw(self, n: int) -> np.ndarray:
        """Next n outputs as a uint64 array."""
        base = self._state
        with np.errstate(over="ignore"):
            counters = (
                np.uint64(base)
                + np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
            )
            out = _mix(counters)
        self._state = (base + n * _GAMMA) & _MASK
        return out

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray | float:
        """Uniform draws in [low, high) as float64."""
        if size is None:
            u = (self.next_u64() >> 11) * 2.0**-53
            return low + (high - low) * u
        n = int(np.prod(size))
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * u).reshape(size)

    def normal(self, mean: float = 0.0, std: float = 1.0, size=None) -> np.ndarray | float:
        """Gaussian draws via Box-Muller on consecutive uniform pairs."""
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        m = (n + 1) // 2
        u1 = np.maximum(self.uniform(size=(m,)), 2.0**-53)  # avoid log(0)
        u2 = self.uniform(size=(m,))
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        z = mean + std * z
        return float(z[0]) if scalar else z.reshape(size)

    def below(self, n: int) -> int:
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """k distinct items, order randomized (partial Fisher-Yates)."""
        if k > len(items):
            raise ValueError(f"cannot sample {k} from {len(items)} items")
        pool = list(items)
        out = []
        for _ in range(k):
            j = self.below(len(pool))
            out.append(pool.pop(j))
        return out
