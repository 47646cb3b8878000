"""Portable pseudo-random stream used for every synthetic draw in the package.

The generator is xoshiro256** (Blackman & Vigna) seeded through splitmix64.
Only 64-bit integer arithmetic is involved, so any implementation that follows
the call order documented here reproduces the same data bit for bit.

Call-order contract
-------------------
* ``next_u64`` advances the state by one step.
* ``uniform`` consumes one ``next_u64`` and returns ``(u >> 11) * 2**-53``.
* ``normals(n)`` consumes ``2 * ceil(n / 2)`` raw words, taken as consecutive
  pairs ``(a, b)``; each pair gives ``r = sqrt(-2 ln(1 - U(a)))`` and the two
  variates ``r cos(2 pi U(b))`` then ``r sin(2 pi U(b))``. A trailing odd
  variate is discarded, nothing is cached between calls.
* ``below(n)`` uses Lemire's multiply-shift with rejection.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * np.pi


def splitmix64(x: int) -> tuple[int, int]:
    """Return ``(new_state, output)`` for one splitmix64 step."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Per-task seed: ``master XOR index`` folded to 64 bits."""
    return (int(master) ^ int(index)) & MASK64


def words_to_unit(words: np.ndarray) -> np.ndarray:
    """Map raw uint64 words to doubles in [0, 1)."""
    return (np.asarray(words, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def box_muller(words: np.ndarray) -> np.ndarray:
    """Turn an even number of raw words into standard normals (pairwise)."""
    u = words_to_unit(words).reshape(-1, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = _TWO_PI * u[:, 1]
    return np.column_stack((r * np.cos(theta), r * np.sin(theta))).ravel()


class Xoshiro256:
    """xoshiro256** generator with splitmix64 seeding."""

    def __init__(self, seed: int):
        x = int(seed) & MASK64
        s = []
        for _ in range(4):
            x, out = splitmix64(x)
            s.append(out)
        self._s = s
        self.seed = int(seed) & MASK64

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        x = (s1 * 5) & MASK64
        result = ((((x << 7) | (x >> 57)) & MASK64) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self._s = [s0, s1, s2, s3]
        return result

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw words as a uint64 array (same order as ``next_u64``)."""
        s0, s1, s2, s3 = self._s
        out = [0] * n
        for i in range(n):
            x = (s1 * 5) & MASK64
            out[i] = ((((x << 7) | (x >> 57)) & MASK64) * 9) & MASK64
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self._s = [s0, s1, s2, s3]
        return np.array(out, dtype=np.uint64)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return words_to_unit(self.raw(n))

    def normals(self, n: int) -> np.ndarray:
        k = (n + 1) // 2
        return box_muller(self.raw(2 * k))[:n]

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = ((1 << 64) - n) % n
        while True:
            prod = self.next_u64() * n
            if (prod & MASK64) >= threshold:
                return prod >> 64

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``, swapping from the top down."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=np.int64)

    def choice(self, n: int, size: int) -> np.ndarray:
        """``size`` independent uniform indices in ``[0, n)`` (with replacement)."""
        return np.array([self.below(n) for _ in range(size)], dtype=np.int64)
