"""Portable seeded randomness.

All stochastic choices in headsmith (weight init, shuffling, dropout
masks, architecture sampling, data splits, synthetic data) draw from
SplitMix64::

    state += 0x9E3779B97F4A7C15
    z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)

with all arithmetic modulo 2**64. Doubles take the top 53 bits:
``(out >> 11) * 2**-53``. Only integer operations are involved, so a given
seed yields the same stream on every platform.
"""

import math

import numpy as np

from . import kernels

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(z):
    """The SplitMix64 output finalizer applied to a single 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed, *keys):
    """Derive an independent 64-bit seed from ``seed`` and integer ``keys``.

    Used for per-trial and per-condition seeds so results never depend on
    execution order.
    """
    h = mix64(int(seed) & MASK64)
    for k in keys:
        h = mix64((h ^ mix64((int(k) + GAMMA) & MASK64)) + GAMMA)
    return h


class SplitMix64:
    """Stateful SplitMix64 stream."""

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def u64(self, n):
        out = np.empty(n, dtype=np.uint64)
        self.state = kernels.splitmix_fill(self.state, out)
        return out

    def uniform(self, size=None, low=0.0, high=1.0):
        """Doubles in [low, high); ``size`` may be an int or shape tuple."""
        if size is None:
            return low + (high - low) * ((self.next_u64() >> 11) * 2.0**-53)
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = math.prod(shape)
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return (low + (high - low) * u).reshape(shape)

    def integer(self, high):
        """One integer in [0, high)."""
        return int(self.uniform() * high)

    def choice(self, options):
        return options[self.integer(len(options))]

    def normal(self, size):
        """Standard normal draws via Box-Muller."""
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = math.prod(shape)
        m = (n + 1) // 2
        u1 = 1.0 - self.uniform(m)  # (0, 1]
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(shape)

    def permutation(self, n):
        idx = np.arange(n, dtype=np.int64)
        if n > 1:
            kernels.fisher_yates(idx, self.uniform(n - 1))
        return idx
