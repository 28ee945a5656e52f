"""Counter-based SplitMix64 stream with a Box-Muller normal transform.

Both pieces are short enough to re-implement bit-for-bit elsewhere:

* draw ``i`` (0-based) of seed ``s`` is ``mix64(s + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)``
  with the standard SplitMix64 finaliser;
* a uniform is ``(x >> 11) * 2**-53``; pairs ``(u1, u2)`` taken from draws
  ``(2j, 2j + 1)`` become ``sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2)``.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of SplitMix64 started at ``seed``."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed % 2**64) + np.arange(1, n + 1, dtype=np.uint64) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def standard_normals(seed: int, n: int) -> np.ndarray:
    pairs = (n + 1) // 2
    raw = splitmix64(seed, 2 * pairs)
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:n]
