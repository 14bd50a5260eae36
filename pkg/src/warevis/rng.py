"""Deterministic pseudo-random numbers.

The generator is PCG-XSH-RR 64/32: a 64-bit LCG (multiplier
6364136223846793005) whose output is permuted by an xorshift and a
data-dependent rotate.  The algorithm has a published, platform-independent
specification, so any two runs seeded identically produce the same stream
regardless of interpreter or OS.  Bounded draws use rejection sampling and
are bias-free.
"""

from __future__ import annotations

_M64 = (1 << 64) - 1
_M32 = (1 << 32) - 1
_MULT = 6364136223846793005
_DEFAULT_SEQ = 0xDA3E39CB94B95BDB
_GOLDEN = 0x9E3779B97F4A7C15


class Pcg32:
    """Seeded 32-bit generator with a deterministic cross-platform stream."""

    __slots__ = ("_state", "_inc")

    def __init__(self, seed: int, seq: int = _DEFAULT_SEQ):
        self._state = 0
        self._inc = ((seq << 1) | 1) & _M64
        self.u32()
        self._state = (self._state + (seed & _M64)) & _M64
        self.u32()

    def u32(self) -> int:
        old = self._state
        self._state = (old * _MULT + self._inc) & _M64
        xorshifted = (((old >> 18) ^ old) >> 27) & _M32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & _M32

    def below(self, n: int) -> int:
        """Uniform integer in [0, n). Rejection sampling keeps it unbiased."""
        if n <= 0:
            raise ValueError(f"below() requires n >= 1, got {n}")
        threshold = ((1 << 32) - n) % n
        while True:
            r = self.u32()
            if r >= threshold:
                return r % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 32 bits of resolution."""
        return self.u32() / 4294967296.0

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()


def splitmix64(x: int) -> int:
    """One step of the splitmix64 scrambler (used only to derive seeds)."""
    x = (x + _GOLDEN) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def derive_seed(base: int, index: int) -> int:
    """Deterministic child seed for stream `index` of a base seed."""
    return splitmix64((base & _M64) ^ splitmix64(index & _M64))
