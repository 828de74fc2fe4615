"""Deterministic PRNG primitives shared by every simulation path.

The generator is xoshiro256++ seeded through splitmix64 (both by Blackman &
Vigna, public domain reference code). The compiled kernel carries a C copy of
the exact same routines; any change here must be mirrored there, or the two
engines stop being bit-identical.
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# 2^-53, used to map the top 53 bits of a draw onto the unit interval.
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix64(z: int) -> int:
    """splitmix64 output finalizer."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def splitmix64_next(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + GOLDEN_GAMMA) & MASK64
    return state, _mix64(state)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Mix run/cell indices into a base seed, one level per index.

    derive_seed(b, k) is the k-th output (0-based) of the splitmix64 stream
    started at state b, so sibling runs get well-separated streams; nesting
    indices (cell, run) chains the derivation.
    """
    s = base_seed & MASK64
    for k in indices:
        s = _mix64((s + ((k + 1) * GOLDEN_GAMMA)) & MASK64)
    return s


class Xoshiro256pp:
    """xoshiro256++ with the canonical splitmix64 state initialization."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        st = seed & MASK64
        st, self.s0 = splitmix64_next(st)
        st, self.s1 = splitmix64_next(st)
        st, self.s2 = splitmix64_next(st)
        st, self.s3 = splitmix64_next(st)
        if self.s0 == 0 and self.s1 == 0 and self.s2 == 0 and self.s3 == 0:
            self.s0 = 1  # all-zero state is the one forbidden point

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        t = (s0 + s3) & MASK64
        result = (((t << 23) | (t >> 41)) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def open01(self) -> float:
        """Uniform double on the open interval (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * _INV_2_53

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n) via the 128-bit multiply-shift map."""
        return (self.next_u64() * n) >> 64

    def exp_rate(self, rate: float) -> float:
        """Exponential with the given rate (mean 1/rate); strictly positive."""
        return -math.log(self.open01()) / rate

    def exp_mean(self, mean: float) -> float:
        """Exponential with the given mean; strictly positive."""
        return -math.log(self.open01()) * mean


def next_injection_delay(rate: float, rng: Xoshiro256pp) -> float:
    """Delay to the next transaction injection, exponential with mean 1/rate."""
    if rate <= 0.0 or not math.isfinite(rate):
        raise ValueError(f"injection rate must be positive and finite, got {rate}")
    return rng.exp_rate(rate)
