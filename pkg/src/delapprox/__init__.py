"""Delaunay approximation of sets sampled by a Poisson point process.

Builds the union of Delaunay cells whose circumcenter falls in a target
set, measures its volume and symmetric difference against the target,
and provides the Monte Carlo experiments and geometric constants that
characterize how the approximation error scales with intensity.
"""

__version__ = "0.1.0"

from .approximation import ApproximationResult, build_approximation, symdiff_volume
from .delaunay import Triangulation, locate, triangulate
from .geometry import (
    Ball,
    DegenerateSimplexError,
    Simplex,
    circumball,
    in_circumball,
    point_in_simplex,
    regular_simplex,
    simplex_volume,
)
from .pointprocess import PointSample, Window, padded_window, sample_poisson
from .rng import split_seed
from .targets import Covariogram, TargetSet, make_target

__all__ = [
    "ApproximationResult",
    "Ball",
    "Covariogram",
    "DegenerateSimplexError",
    "PointSample",
    "Simplex",
    "TargetSet",
    "Triangulation",
    "Window",
    "build_approximation",
    "circumball",
    "in_circumball",
    "locate",
    "make_target",
    "padded_window",
    "point_in_simplex",
    "regular_simplex",
    "sample_poisson",
    "simplex_volume",
    "split_seed",
    "symdiff_volume",
    "triangulate",
    "__version__",
]
