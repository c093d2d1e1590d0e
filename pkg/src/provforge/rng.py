"""Portable seeded random stream.

The generator is xoshiro256** with its 256-bit state filled by SplitMix64
from a 64-bit seed. Sampling discipline, so that any implementation can
reproduce a run bit for bit:

* ``next_u64``      raw xoshiro256** output.
* ``random()``      ``(next_u64() >> 11) * 2**-53``, uniform on [0, 1).
* ``randbelow(n)``  Lemire's multiply-shift with rejection, unbiased.
* ``normal``        Kinderman-Monahan ratio of uniforms with Leva's bounds.
* ``gamma``         Marsaglia-Tsang; shape < 1 uses the ``U**(1/shape)`` boost.

Independent per-graph streams are obtained with :meth:`Rng.stream`.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int):
    """Yield the SplitMix64 sequence started from ``state``."""
    while True:
        state = (state + GOLDEN) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Rng:
    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int = 0):
        mix = splitmix64(seed & MASK64)
        self._s0, self._s1, self._s2, self._s3 = (next(mix) for _ in range(4))

    @classmethod
    def stream(cls, seed: int, index: int) -> "Rng":
        """Independent stream number ``index`` derived from a master seed."""
        mix = splitmix64((seed ^ (index * GOLDEN)) & MASK64)
        next(mix)
        return cls(next(mix))

    def getstate(self):
        return (self._s0, self._s1, self._s2, self._s3)

    def setstate(self, state) -> None:
        self._s0, self._s1, self._s2, self._s3 = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        m = self.next_u64() * n
        low = m & MASK64
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                m = self.next_u64() * n
                low = m & MASK64
        return m >> 64

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        return lo + self.randbelow(hi - lo + 1)

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def normal(self, mean: float = 0.0, stddev: float = 1.0) -> float:
        while True:
            u = self.random()
            if u == 0.0:
                continue
            v = 1.7156 * (self.random() - 0.5)
            x = u - 0.449871
            y = abs(v) + 0.386595
            q = x * x + y * (0.19600 * y - 0.25472 * x)
            if q < 0.27597:
                break
            if q > 0.27846:
                continue
            if v * v <= -4.0 * math.log(u) * u * u:
                break
        return mean + stddev * v / u

    def gamma(self, shape: float, scale: float = 1.0) -> float:
        if shape <= 0 or scale <= 0:
            raise ValueError("gamma needs shape > 0 and scale > 0")
        if shape < 1.0:
            g = self.gamma(shape + 1.0, 1.0)
            u = self.random()
            while u == 0.0:
                u = self.random()
            return g * u ** (1.0 / shape) * scale
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.random()
            if u < 1.0 - 0.0331 * x * x * x * x:
                return d * v * scale
            if u > 0.0 and math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
                return d * v * scale
