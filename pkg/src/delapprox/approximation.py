"""Delaunay-cell approximation of a target set.

The approximating set is the union of the Delaunay cells whose
circumcenter lies in the target A.  Its volume is the exact sum of the
selected cell volumes (cells are interior-disjoint), and the volume of
the symmetric difference against A is estimated by Monte Carlo, split
into the part outside A (per-cell uniform samples in each selected
simplex) and the part inside A (stratified samples over A located in
the triangulation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .delaunay import Triangulation
from .targets import TargetSet

__all__ = ["ApproximationResult", "SymdiffEstimate", "build_approximation", "symdiff_volume"]

#: uniform samples drawn inside every selected cell for the outside part
DEFAULT_SAMPLES_PER_CELL = 64
#: total stratified samples over the target for the inside part
DEFAULT_INSIDE_SAMPLES = 1 << 16
#: samples per stratum (the stratum grid is sized to meet the total)
_PER_STRATUM = 16


@dataclass(frozen=True)
class SymdiffEstimate:
    """Monte Carlo estimate of vol(A Δ A_approx), with its two parts."""

    value: float
    stderr: float
    outside_part: float
    outside_stderr: float
    inside_part: float
    inside_stderr: float
    samples_per_cell: int
    inside_samples: int
    seed: int


@dataclass
class ApproximationResult:
    """Selection of Delaunay cells approximating a target set."""

    selected_cell_indices: np.ndarray
    volume_estimate: float
    leakage_count: int
    intensity: Optional[float] = None
    seed: Optional[int] = None
    symdiff: Optional[SymdiffEstimate] = None

    @property
    def n_selected(self) -> int:
        return int(self.selected_cell_indices.size)

    @property
    def symdiff_estimate(self) -> Optional[float]:
        return None if self.symdiff is None else self.symdiff.value

    @property
    def symdiff_stderr(self) -> Optional[float]:
        return None if self.symdiff is None else self.symdiff.stderr


def build_approximation(tri: Triangulation, target: TargetSet) -> ApproximationResult:
    """Select the cells whose circumcenter lies in the target.

    The triangulation must come from a sample whose window strictly
    contains the target's bounding box, so that boundary effects of the
    window stay away from A.
    """
    sample = tri.source_points
    if sample is None or sample.window is None:
        raise ValueError("triangulation carries no sampling window")
    window = sample.window
    lo, hi = target.bounding_box()
    if window.dim != tri.dim or lo.shape[0] != tri.dim:
        raise ValueError("target dimension does not match the triangulation")
    if not (np.all(window.lower < lo) and np.all(window.upper > hi)):
        raise ValueError("sampling window must contain the target with positive margin")

    selected = np.flatnonzero(target.contains(tri.circumcenters))
    volume = math.fsum(tri.volumes[selected].tolist())

    centers = tri.circumcenters[selected]
    radii = tri.circumradii[selected]
    leaky = np.any(centers - radii[:, None] < window.lower, axis=1) | np.any(
        centers + radii[:, None] > window.upper, axis=1
    )
    return ApproximationResult(
        selected_cell_indices=selected.astype(np.int64),
        volume_estimate=volume,
        leakage_count=int(leaky.sum()),
        intensity=sample.intensity,
        seed=sample.seed,
    )


def symdiff_volume(
    tri: Triangulation,
    result: ApproximationResult,
    target: TargetSet,
    samples_per_cell: int = DEFAULT_SAMPLES_PER_CELL,
    inside_samples: int = DEFAULT_INSIDE_SAMPLES,
    seed: int = 0,
) -> SymdiffEstimate:
    """Estimate vol(A Δ A_approx) and attach it to the result.

    Outside part: each selected simplex gets ``samples_per_cell``
    uniform points; the fraction falling outside A times the cell
    volume estimates vol(cell \\ A), and the per-cell binomial variances
    combine into the standard error.  Inside part: A's bounding box is
    cut into a stratum grid with ``_PER_STRATUM`` points each (about
    ``inside_samples`` in total); points inside A whose containing cell
    is unselected estimate vol(A \\ A_approx) with per-stratum binomial
    variances.
    """
    if samples_per_cell < 1 or inside_samples < 1:
        raise ValueError("sample counts must be positive")
    rng = np.random.default_rng(seed)

    outside, out_var = _outside_part(tri, result, target, samples_per_cell, rng)
    inside, in_var = _inside_part(tri, result, target, inside_samples, rng)

    est = SymdiffEstimate(
        value=outside + inside,
        stderr=math.sqrt(out_var + in_var),
        outside_part=outside,
        outside_stderr=math.sqrt(out_var),
        inside_part=inside,
        inside_stderr=math.sqrt(in_var),
        samples_per_cell=samples_per_cell,
        inside_samples=inside_samples,
        seed=seed,
    )
    result.symdiff = est
    return est


def _uniform_in_simplices(vertices: np.ndarray, k: int, rng) -> np.ndarray:
    """k uniform points in each simplex; vertices is (m, d+1, d)."""
    m, dp1, _ = vertices.shape
    w = rng.standard_exponential((m, k, dp1))
    w /= w.sum(axis=2, keepdims=True)
    return np.einsum("mkj,mjd->mkd", w, vertices)


def _outside_part(tri, result, target, k, rng):
    sel = result.selected_cell_indices
    if sel.size == 0:
        return 0.0, 0.0
    vols = tri.volumes[sel]
    contributions = []
    variances = []
    chunk = max(1, (1 << 21) // max(1, k * (tri.dim + 1)))
    for start in range(0, sel.size, chunk):
        ids = sel[start : start + chunk]
        verts = tri.points[tri.cell_indices[ids]]
        pts = _uniform_in_simplices(verts, k, rng)
        flat = pts.reshape(-1, tri.dim)
        out = ~target.contains(flat)
        frac = out.reshape(len(ids), k).mean(axis=1)
        v = vols[start : start + len(ids)]
        contributions.extend((v * frac).tolist())
        variances.extend((v * v * frac * (1.0 - frac) / k).tolist())
    return math.fsum(contributions), math.fsum(variances)


def _inside_part(tri, result, target, total, rng):
    d = tri.dim
    lo, hi = target.bounding_box()
    grid = max(1, int(round((total / _PER_STRATUM) ** (1.0 / d))))
    per = max(1, int(round(total / grid**d)))
    edges = [np.linspace(lo[i], hi[i], grid + 1) for i in range(d)]
    stratum_vol = float(np.prod((hi - lo) / grid))

    selected_mask = np.zeros(tri.n_cells, dtype=bool)
    selected_mask[result.selected_cell_indices] = True

    # one row of strata at a time keeps the sample arrays small
    mesh = np.stack(
        np.meshgrid(*[np.arange(grid) for _ in range(d)], indexing="ij"), axis=-1
    ).reshape(-1, d)
    contributions = []
    variances = []
    chunk = max(1, (1 << 18) // per)
    for start in range(0, len(mesh), chunk):
        cells = mesh[start : start + chunk]
        base = np.stack([edges[i][cells[:, i]] for i in range(d)], axis=1)
        u = rng.random((len(cells), per, d))
        pts = base[:, None, :] + u * ((hi - lo) / grid)
        flat = pts.reshape(-1, d)
        in_a = target.contains(flat)
        miss = np.zeros(flat.shape[0], dtype=bool)
        if in_a.any():
            located = tri.locate(flat[in_a])
            hit_sel = (located >= 0) & selected_mask[np.clip(located, 0, None)]
            miss[in_a] = ~hit_sel
        frac = miss.reshape(len(cells), per).mean(axis=1)
        contributions.extend((stratum_vol * frac).tolist())
        variances.extend(
            (stratum_vol * stratum_vol * frac * (1.0 - frac) / per).tolist()
        )
    return math.fsum(contributions), math.fsum(variances)
