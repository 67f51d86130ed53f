"""Stationary Poisson point process sampling on box windows.

Sampling is exact: the point count is Poisson with mean intensity times
window volume and the locations are independent uniforms.  Identical
(window, intensity, seed) triples always reproduce the same sample, and
child seeds for replications come from the counter-based
:func:`delapprox.rng.split_seed`, so parallel runs stay deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import kappa
from .rng import split_seed

__all__ = ["Window", "PointSample", "sample_poisson", "padded_window", "split_seed"]


@dataclass(frozen=True)
class Window:
    """Axis-aligned box [lower_1, upper_1] x ... x [lower_d, upper_d].

    ``margin`` records how much padding was added around a target's
    bounding box when the window was built; it is bookkeeping only and
    does not change the geometry.
    """

    lower: np.ndarray
    upper: np.ndarray
    margin: float = 0.0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("window must have positive extent in every direction")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all((p >= self.lower) & (p <= self.upper), axis=1)

    def inflate(self, margin: float) -> "Window":
        return Window(self.lower - margin, self.upper + margin, margin=self.margin + margin)


@dataclass(frozen=True)
class PointSample:
    """A realization of the process restricted to a window."""

    points: np.ndarray
    intensity: float
    seed: int
    window: Window

    @property
    def size(self) -> int:
        return self.points.shape[0]


def sample_poisson(window: Window, intensity: float, seed: int) -> PointSample:
    """Sample a stationary Poisson process of the given intensity on a window.

    Parameters
    ----------
    window : Window
    intensity : float
        Expected number of points per unit volume, > 0.
    seed : int
        Stream seed; identical arguments give identical samples.

    Returns
    -------
    PointSample
    """
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(intensity * window.volume))
    extent = window.upper - window.lower
    pts = window.lower + extent * rng.random((n, window.dim))
    return PointSample(points=pts, intensity=float(intensity), seed=int(seed), window=window)


def _tail_mass(bbox_sides: np.ndarray, d: int, intensity: float, m: float) -> float:
    vol = float(np.prod(bbox_sides + 2.0 * m))
    return float(np.exp(-intensity * kappa(d) * (m / 4.0) ** d) * intensity * vol)


def padded_window(target, intensity: float, epsilon: float = 1e-6) -> Window:
    """Window enclosing a target's bounding box with enough padding that
    cells reaching across the window boundary are negligible.

    The margin m is the smallest value with

        exp(-t kappa_d (m/4)^d) * t * vol(bbox + m) <= epsilon,

    found by bisection (the left side is log-concave in m, so the
    admissible set is a half line).  The heuristic reading: a cell of
    the triangulation whose circumball leaks out of the padded window
    while touching the target region must have circumradius at least
    m/4, and empty balls of that radius anywhere near the target are
    exponentially unlikely.

    ``target`` is anything with a ``bounding_box()`` method, or a plain
    (lower, upper) pair.
    """
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if hasattr(target, "bounding_box"):
        lo, hi = target.bounding_box()
    else:
        lo, hi = target
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    d = lo.shape[0]
    sides = hi - lo

    if _tail_mass(sides, d, intensity, 0.0) <= epsilon:
        return Window(lo, hi, margin=0.0)
    m_hi = 1.0
    while _tail_mass(sides, d, intensity, m_hi) > epsilon:
        m_hi *= 2.0
        if m_hi > 1e9:
            raise RuntimeError("padding search failed to converge")
    m_lo = 0.0
    for _ in range(200):
        mid = 0.5 * (m_lo + m_hi)
        if _tail_mass(sides, d, intensity, mid) <= epsilon:
            m_hi = mid
        else:
            m_lo = mid
        if m_hi - m_lo <= 1e-12 * max(1.0, m_hi):
            break
    return Window(lo - m_hi, hi + m_hi, margin=m_hi)
