"""Counter-based seed derivation for reproducible parallel streams."""
from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def split_seed(seed: int, index: int) -> int:
    """Derive an independent 64-bit child seed from (seed, index).

    SplitMix64: the counter ``seed + index * gamma`` is passed through
    the usual avalanche finalizer.  Pure integer arithmetic, so the
    result is identical on every platform, and for a fixed seed the map
    ``index -> child`` is injective over any 2^64-wide index range
    (odd gamma plus a bijective finalizer).
    """
    z = (int(seed) + int(index) * _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK
