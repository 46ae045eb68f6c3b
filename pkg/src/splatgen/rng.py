"""Counter-based random numbers.

Every draw is a pure function of ``(seed, *keys)`` so results never depend on
call order, worker count or platform. The mixer is SplitMix64 (Steele, Lea &
Flood 2014): the key tuple is folded into the seed one word at a time, then
the top 53 bits of the final state become a double in ``[0, 1)``.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Stream tags keep independent decisions from sharing keys.
STREAM_CAMERA = 1
STREAM_ASSET = 2
STREAM_BACKGROUND = 3
STREAM_MOTION = 4
STREAM_PROCEDURAL = 5
STREAM_JITTER = 6


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def hash_keys(seed: int, *keys: int) -> int:
    h = splitmix64(seed & _MASK)
    for k in keys:
        h = splitmix64(h ^ (k & _MASK))
    return h


def uniform(seed: int, *keys: int) -> float:
    """Uniform double in ``[0, 1)`` keyed on ``(seed, *keys)``."""
    return (hash_keys(seed, *keys) >> 11) * (1.0 / (1 << 53))


def uniform_range(lo: float, hi: float, seed: int, *keys: int) -> float:
    if lo == hi:
        return float(lo)
    return lo + (hi - lo) * uniform(seed, *keys)


def randint(n: int, seed: int, *keys: int) -> int:
    """Uniform integer in ``[0, n)``."""
    if n <= 0:
        raise ValueError("randint needs n > 0")
    return min(int(uniform(seed, *keys) * n), n - 1)


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit seed for seeding a numpy Generator inside one keyed unit of work."""
    return hash_keys(seed, *keys)
