"""Delaunay tessellation of a finite point set in dimension d.

Incremental Bowyer-Watson insertion over an enclosing super-simplex.
Two interchangeable engines build the same structure:

* a compiled flat-array kernel (d = 2, 3) whose floating-point
  predicate signs are certified against forward error bounds, and
* a pure-Python engine with exact rational arithmetic and a
  deterministic symbolic perturbation, keyed on point index, that
  breaks cospherical ties.

The kernel refuses to guess: whenever a determinant sign cannot be
certified it aborts and the input is rebuilt by the exact engine, so
every returned tessellation satisfies the empty-circumball property.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _bw
from .geometry import (
    Simplex,
    _frac_det,
    _generic_det_with_bound,
    _incircle2,
    _insphere3,
    _orient2,
    _orient3,
    batch_circumballs,
    point_in_simplex,
    regular_simplex,
)

__all__ = [
    "AffinelyDependentError",
    "Triangulation",
    "cell_centers",
    "locate",
    "triangulate",
]

_SUPER_SCALE = 10.0


class AffinelyDependentError(ValueError):
    """The input points span a proper affine subspace, so no
    full-dimensional Delaunay cell exists."""


@dataclass(eq=False)
class Triangulation:
    """Delaunay tessellation with flat-array cell storage.

    ``cell_indices`` holds one row of d+1 vertex indices per cell, rows
    and columns in canonical sorted order.  ``adjacency[i, j]`` is the
    cell sharing the facet of cell i opposite its j-th vertex, or -1 on
    the hull.  Completed instances are immutable by convention and safe
    to share across threads.
    """

    points: np.ndarray
    cell_indices: np.ndarray
    adjacency: np.ndarray
    circumcenters: np.ndarray
    circumradii: np.ndarray
    volumes: np.ndarray
    engine: str
    source_points: Optional[object] = None
    _simplices: Optional[list] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cell_indices.shape[0]

    @property
    def cells(self) -> list:
        """Cells as Simplex objects (materialized lazily)."""
        if self._simplices is None:
            self._simplices = [Simplex(self.points[row]) for row in self.cell_indices]
        return self._simplices

    @property
    def total_volume(self) -> float:
        """Volume of the convex hull of the points (sum of cells)."""
        return float(self.volumes.sum())

    def locate(self, queries) -> np.ndarray:
        """Cell index containing each query point, -1 outside the hull.

        Visibility walk with a circumball-candidate scan as fallback;
        a point on a shared facet reports one of its incident cells.
        """
        q = np.asarray(queries, dtype=np.float64)
        single = q.ndim == 1
        q = np.ascontiguousarray(np.atleast_2d(q))
        if q.shape[1] != self.dim:
            raise ValueError(f"queries must have dimension {self.dim}")
        out = np.empty(q.shape[0], dtype=np.int64)
        if self.dim in (2, 3) and self.n_cells > 0:
            _bw.locate_walk(self.points, self.cell_indices, self.adjacency, q, out, 0)
            unresolved = np.nonzero(out == -2)[0]
        else:
            out.fill(-2)
            unresolved = np.arange(q.shape[0])
        for i in unresolved:
            out[i] = self._locate_scan(q[i])
        return out[0] if single else out

    def _locate_scan(self, p: np.ndarray) -> int:
        if self.n_cells == 0:
            return -1
        diff = self.circumcenters - p
        d2 = np.einsum("ij,ij->i", diff, diff)
        candidates = np.nonzero(d2 <= self.circumradii**2 * (1.0 + 1e-9))[0]
        for ci in candidates:
            if point_in_simplex(self.points[self.cell_indices[ci]], p, tol=1e-9):
                return int(ci)
        return -1

    def dump_cells(self, file) -> None:
        """Debug dump, one cell per line: vertex indices, circumcenter
        coordinates, circumradius, tab-separated."""
        close = False
        if isinstance(file, (str, bytes)):
            file = open(file, "w", encoding="utf-8")
            close = True
        try:
            for i in range(self.n_cells):
                parts = [str(int(v)) for v in self.cell_indices[i]]
                parts += [repr(float(x)) for x in self.circumcenters[i]]
                parts.append(repr(float(self.circumradii[i])))
                file.write("\t".join(parts) + "\n")
        finally:
            if close:
                file.close()


def cell_centers(tri: Triangulation) -> np.ndarray:
    """Circumcenters of all cells, order matching ``cell_indices``."""
    return tri.circumcenters


def locate(tri: Triangulation, p) -> np.ndarray:
    """Module-level alias for :meth:`Triangulation.locate`."""
    return tri.locate(p)


def _super_simplex(pts: np.ndarray, scale: float) -> np.ndarray:
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    return regular_simplex(pts.shape[1], (lo + hi) / 2.0, scale * diag)


def _exact_side(pts: np.ndarray, facet: np.ndarray, pid: int) -> int:
    """Exact sign of point pid against the facet's hyperplane."""
    base = [Fraction(float(x)) for x in pts[facet[0]]]
    rows = [
        [Fraction(float(x)) - b for x, b in zip(pts[int(f)], base)]
        for f in facet[1:]
    ]
    rows.append([Fraction(float(x)) - b for x, b in zip(pts[pid], base)])
    det = _frac_det(rows)
    return (det > 0) - (det < 0)


def _coverage_gap(pts: np.ndarray, cells: np.ndarray, adjacency: np.ndarray) -> bool:
    """Whether the kept complex misses part of the convex hull.

    Cells built with an enclosing-simplex vertex are discarded, which
    can leave holes near the hull when a legitimate cell's circumball
    reached that far.  Two sound symptoms: an input point that belongs
    to no kept cell, and a boundary facet with an input point strictly
    beyond it (confirmed in exact arithmetic, so coplanar points on
    grid-like inputs never trigger a false alarm).
    """
    n, d = pts.shape
    used = np.zeros(n, dtype=bool)
    used[cells.ravel()] = True
    if not used.all():
        return True
    diag = float(np.linalg.norm(np.ptp(pts, axis=0)))
    slack = 1e-10 * max(diag, 1e-300)
    rows, slots = np.nonzero(adjacency == -1)
    for ci, slot in zip(rows, slots):
        facet = np.delete(cells[ci], slot)
        opp = int(cells[ci, slot])
        f0 = pts[facet[0]]
        if d == 2:
            e = pts[facet[1]] - f0
            normal = np.array([-e[1], e[0]])
        elif d == 3:
            normal = np.cross(pts[facet[1]] - f0, pts[facet[2]] - f0)
        else:
            e = pts[facet[1:]] - f0
            _, _, vh = np.linalg.svd(e)
            normal = vh[-1]
        norm = np.linalg.norm(normal)
        if norm == 0:
            return True
        normal = normal / norm
        s_opp = float(np.dot(pts[opp] - f0, normal))
        if abs(s_opp) <= slack:
            side_opp = _exact_side(pts, facet, opp)
        else:
            side_opp = 1 if s_opp > 0 else -1
        s_all = (pts - f0) @ normal
        candidates = np.nonzero(-side_opp * s_all > -slack)[0]
        for pid in candidates:
            if pid == opp or pid in facet:
                continue
            side = _exact_side(pts, facet, int(pid))
            if side != 0 and side == -side_opp:
                return True
    return False


def _affinely_dependent(pts: np.ndarray) -> bool:
    """Exact test: do the points span a proper affine subspace?"""
    d = pts.shape[1]
    base = [Fraction(float(x)) for x in pts[0]]
    rows = [
        [Fraction(float(x)) - b for x, b in zip(p, base)]
        for p in pts[1:]
    ]
    rank = 0
    col = 0
    while rank < d and col < d and rank < len(rows):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            col += 1
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        prow = rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                factor = rows[r][col] / prow[col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], prow)]
        rank += 1
        col += 1
    return rank < d


def _insertion_order(pts: np.ndarray) -> np.ndarray:
    """Spatial-grid serpentine order: consecutive insertions are close
    together, which keeps the locate walk short."""
    n, d = pts.shape
    nb = max(1, int(np.ceil((n / 8.0) ** (1.0 / d))))
    lo = pts.min(axis=0)
    span = np.ptp(pts, axis=0)
    span = np.where(span > 0, span, 1.0)
    g = np.minimum(((pts - lo) / span * nb).astype(np.int64), nb - 1)
    key = g[:, 0].copy()
    for a in range(1, d):
        flipped = np.where(key % 2 == 0, g[:, a], nb - 1 - g[:, a])
        key = key * nb + flipped
    return np.lexsort((np.arange(n), key)).astype(np.int64)


def _run_kernel(pts_all, n_real, d, order):
    """Drive the compiled kernel, growing capacity on demand.

    Returns (cells, neighbors) over alive slots (super vertices still
    present), or None when a predicate sign could not be certified.
    """
    per_point = 8 if d == 2 else 24
    cap = per_point * max(n_real, 64) + 1024
    for _ in range(8):
        cells = np.empty((cap, d + 1), dtype=np.int32)
        neighbors = np.empty((cap, d + 1), dtype=np.int32)
        alive = np.zeros(cap, dtype=np.uint8)
        stamp = np.zeros(cap, dtype=np.int64)
        stack = np.empty(cap, dtype=np.int64)
        bf_bad = np.empty(cap, dtype=np.int64)
        bf_skip = np.empty(cap, dtype=np.int64)
        rkeys = np.empty((d * cap, d + 1), dtype=np.int64)
        status, used = _bw.build(
            pts_all, n_real, d, order, cells, neighbors, alive, stamp,
            stack, bf_bad, bf_skip, rkeys,
        )
        if status == _bw.STATUS_OK:
            idx = np.nonzero(alive[:used])[0]
            remap = np.full(used, -1, dtype=np.int32)
            remap[idx] = np.arange(idx.size, dtype=np.int32)
            kept_nb = neighbors[idx]
            kept_nb = np.where(kept_nb >= 0, remap[np.clip(kept_nb, 0, used - 1)], -1)
            return cells[idx].copy(), kept_nb.astype(np.int32)
        if status == _bw.STATUS_CAPACITY:
            cap *= 2
            continue
        return None
    return None


class _ExactEngine:
    """Bowyer-Watson with exact tie handling.

    Floating-point predicates run first; any determinant whose sign the
    forward error bound cannot certify is recomputed in rational
    arithmetic.  An exact zero (cospherical tie) is resolved by an
    infinitesimal lowering of each point's paraboloid lift, the i-th
    point by eps^(i+1), which is equivalent to ranking the cofactors of
    the lift column by point index.  The perturbation is global and
    consistent, so the result is a genuine triangulation with no
    zero-volume cells even for grids and cocircular inputs.
    """

    def __init__(self, pts_all: np.ndarray, n_real: int):
        self.pts = pts_all
        self.d = pts_all.shape[1]
        self.n_real = n_real
        self._frac: dict[int, tuple] = {}
        first = tuple(range(n_real, n_real + self.d + 1))
        self.cells = [first]
        self.neighbors = [[-1] * (self.d + 1)]
        self.alive = [True]
        self.osign = [self._orient_sign(first)]
        self.last = 0

    # -- predicates ---------------------------------------------------

    def _fracs(self, i: int) -> tuple:
        row = self._frac.get(i)
        if row is None:
            row = tuple(Fraction(float(x)) for x in self.pts[i])
            self._frac[i] = row
        return row

    def _orient_sign(self, cell) -> int:
        v = self.pts[list(cell)]
        if self.d == 2:
            det, err = _orient2(v)
        elif self.d == 3:
            det, err = _orient3(v)
        else:
            det, err = _generic_det_with_bound(v[1:] - v[0])
        if abs(det) > err:
            return 1 if det > 0 else -1
        base = self._fracs(cell[0])
        rows = [
            [a - b for a, b in zip(self._fracs(cell[i]), base)]
            for i in range(1, self.d + 1)
        ]
        exact = _frac_det(rows)
        if exact == 0:
            raise AssertionError("zero-volume cell escaped the perturbed predicates")
        return 1 if exact > 0 else -1

    def inside_ball(self, ci: int, qi: int) -> bool:
        """Is point qi strictly inside the (perturbed) circumball of cell ci?"""
        cell = self.cells[ci]
        v = self.pts[list(cell)]
        p = self.pts[qi]
        if self.d == 2:
            det, err = _incircle2(v, p)
        elif self.d == 3:
            det, err = _insphere3(v, p)
        else:
            diff = v - p
            lifted = np.column_stack([diff, np.einsum("ij,ij->i", diff, diff)])
            det, err = _generic_det_with_bound(lifted)
        if abs(det) > err:
            s = 1 if det > 0 else -1
            return ((-1) ** self.d) * s * self.osign[ci] > 0
        return self._perturbed_inside(cell, qi, self.osign[ci])

    def _perturbed_inside(self, cell, qi: int, osign: int) -> bool:
        d = self.d
        idx = list(cell) + [qi]
        order = sorted(range(d + 2), key=idx.__getitem__)
        inversions = sum(
            1
            for i in range(d + 2)
            for j in range(i + 1, d + 2)
            if order[i] > order[j]
        )
        sign_pi = -1 if inversions % 2 else 1
        rows = []
        for k in order:
            coords = self._fracs(idx[k])
            rows.append(list(coords) + [sum(x * x for x in coords), Fraction(1)])
        h = _frac_det(rows)
        if h != 0:
            hs = 1 if h > 0 else -1
        else:
            hs = 0
            for k in range(d + 2):
                minor = [rows[r][:d] + [Fraction(1)] for r in range(d + 2) if r != k]
                mk = _frac_det(minor)
                if mk != 0:
                    # the lift of the lowest-index point dominates; its
                    # cofactor is (-1)^(k+d) * mk and enters negated
                    cs = 1 if mk > 0 else -1
                    hs = -cs if (k + d) % 2 == 0 else cs
                    break
            else:
                raise AssertionError("all lift cofactors vanished")
        return ((-1) ** d) * sign_pi * hs * osign > 0

    # -- walk ----------------------------------------------------------

    def _facet_orient_float(self, cell, skip, q):
        f = [cell[j] for j in range(self.d + 1) if j != skip]
        v = np.vstack([self.pts[f], q[None, :]])
        if self.d == 2:
            return _orient2(v)
        if self.d == 3:
            return _orient3(v)
        return _generic_det_with_bound(v[1:] - v[0])

    def _walk(self, qi: int, max_steps: int) -> int:
        q = self.pts[qi]
        ci = self.last
        prev = -1
        for _ in range(max_steps):
            moved = False
            cell = self.cells[ci]
            for skip in range(self.d + 1):
                nb = self.neighbors[ci][skip]
                if nb == prev and nb != -1:
                    continue
                dq, bq = self._facet_orient_float(cell, skip, q)
                dv, bv = self._facet_orient_float(cell, skip, self.pts[cell[skip]])
                if (dq > bq and dv < -bv) or (dq < -bq and dv > bv):
                    if nb == -1:
                        return -1
                    prev = ci
                    ci = nb
                    moved = True
                    break
            if not moved:
                return ci
        return -2

    # -- insertion -----------------------------------------------------

    def insert(self, ip: int) -> None:
        d = self.d
        max_steps = 64 + 8 * int(len(self.pts) ** (1.0 / d))
        seed = self._walk(ip, max_steps)
        if seed >= 0 and not self.inside_ball(seed, ip):
            seed = -2
        if seed < 0:
            seed = next(
                (
                    k
                    for k in range(len(self.cells))
                    if self.alive[k] and self.inside_ball(k, ip)
                ),
                -1,
            )
            if seed < 0:
                raise AssertionError("no cell's circumball contains the new point")

        stack = [seed]
        stamped = {seed}
        boundary = []
        while stack:
            cur = stack.pop()
            self.alive[cur] = False
            for skip in range(d + 1):
                nb = self.neighbors[cur][skip]
                if nb == -1:
                    boundary.append((cur, skip))
                elif self.alive[nb]:
                    if nb in stamped:
                        continue
                    if self.inside_ball(nb, ip):
                        stamped.add(nb)
                        stack.append(nb)
                    else:
                        boundary.append((cur, skip))

        ridges: dict[tuple, tuple] = {}
        first_new = len(self.cells)
        for bcell, bskip in boundary:
            old = self.cells[bcell]
            facet = tuple(old[j] for j in range(d + 1) if j != bskip)
            nc = len(self.cells)
            new_cell = (ip,) + facet
            self.cells.append(new_cell)
            outside = self.neighbors[bcell][bskip]
            self.neighbors.append([outside] + [-1] * d)
            self.alive.append(True)
            self.osign.append(self._orient_sign(new_cell))
            if outside != -1:
                self.neighbors[outside][
                    self.neighbors[outside].index(bcell)
                ] = nc
            for j in range(1, d + 1):
                key = tuple(sorted(new_cell[jj] for jj in range(1, d + 1) if jj != j))
                other = ridges.pop(key, None)
                if other is None:
                    ridges[key] = (nc, j)
                else:
                    oc, oslot = other
                    self.neighbors[nc][j] = oc
                    self.neighbors[oc][oslot] = nc
        if ridges:
            raise AssertionError("unpaired ridge on cavity boundary")
        self.last = first_new

    def run(self, order) -> tuple[np.ndarray, np.ndarray]:
        for ip in order:
            self.insert(int(ip))
        keep = [k for k in range(len(self.cells)) if self.alive[k]]
        cells = np.asarray([self.cells[k] for k in keep], dtype=np.int32)
        remap = {old: new for new, old in enumerate(keep)}
        nbs = np.asarray(
            [
                [remap.get(nb, -1) if nb != -1 else -1 for nb in self.neighbors[k]]
                for k in keep
            ],
            dtype=np.int32,
        )
        return cells, nbs


def _canonicalize(cells, neighbors):
    """Sort vertices within rows and rows lexicographically, carrying
    the facet-aligned adjacency along, so both engines emit identical
    arrays for the same tessellation."""
    perm = np.argsort(cells, axis=1)
    cells = np.take_along_axis(cells, perm, axis=1)
    neighbors = np.take_along_axis(neighbors, perm, axis=1)
    row_order = np.lexsort(tuple(cells[:, k] for k in range(cells.shape[1] - 1, -1, -1)))
    cells = np.ascontiguousarray(cells[row_order])
    neighbors = neighbors[row_order]
    m = cells.shape[0]
    inverse = np.empty(m, dtype=np.int32)
    inverse[row_order] = np.arange(m, dtype=np.int32)
    neighbors = np.where(
        neighbors >= 0, inverse[np.clip(neighbors, 0, m - 1)], np.int32(-1)
    )
    return cells, np.ascontiguousarray(neighbors)


def triangulate(sample, *, engine: str = "auto") -> Triangulation:
    """Delaunay tessellation of a point sample.

    ``sample`` is either a PointSample or a plain (n, d) coordinate
    array.  ``engine`` selects "fast" (compiled kernel, d = 2 or 3),
    "exact" (rational arithmetic with symbolic perturbation), or "auto"
    (kernel first, exact rerun whenever the kernel cannot certify a
    predicate sign).
    """
    source = None
    pts = sample
    if hasattr(sample, "points"):
        source = sample
        pts = sample.points
    pts = np.ascontiguousarray(np.asarray(pts, dtype=np.float64))
    if pts.ndim != 2:
        raise ValueError("points must form an (n, d) array")
    n, d = pts.shape
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} points in dimension {d}, got {n}")
    sorted_rows = pts[np.lexsort(tuple(pts[:, k] for k in range(d - 1, -1, -1)))]
    if np.any(np.all(sorted_rows[1:] == sorted_rows[:-1], axis=1)):
        raise ValueError("duplicate points are not supported")
    if engine not in ("auto", "fast", "exact"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "fast" and d not in (2, 3):
        raise ValueError("the fast engine supports d = 2 and d = 3 only")

    order = _insertion_order(pts)
    scale = _SUPER_SCALE
    cells = neighbors = None
    used_engine = "fast"
    dependence_checked = False
    for _ in range(8):
        pts_all = np.vstack([pts, _super_simplex(pts, scale)])
        raw = None
        used_engine = "fast"
        if engine in ("auto", "fast") and d in (2, 3):
            raw = _run_kernel(pts_all, n, d, order)
            if raw is None and engine == "fast":
                raise RuntimeError(
                    "fast engine could not certify all predicate signs; "
                    "rerun with engine='exact'"
                )
        if raw is None:
            raw = _ExactEngine(pts_all, n).run(order)
            used_engine = "exact"

        all_cells, all_nb = raw
        keep = np.nonzero((all_cells < n).all(axis=1))[0]
        if keep.size:
            remap = np.full(all_cells.shape[0], -1, dtype=np.int32)
            remap[keep] = np.arange(keep.size, dtype=np.int32)
            kept_nb = all_nb[keep]
            kept_nb = np.where(
                kept_nb >= 0,
                remap[np.clip(kept_nb, 0, all_cells.shape[0] - 1)],
                np.int32(-1),
            )
            cells, neighbors = _canonicalize(all_cells[keep], kept_nb)
            if not _coverage_gap(pts, cells, neighbors):
                break
        elif not dependence_checked:
            # no full-dimensional cell survived: either genuinely flat
            # input, or an extremely flat simplex whose circumballs all
            # reach the enclosing simplex that is about to be enlarged
            dependence_checked = True
            if _affinely_dependent(pts):
                raise AffinelyDependentError(
                    "input points are affinely dependent "
                    "(no full-dimensional cell)"
                )
        cells = neighbors = None
        scale *= 32.0
    if cells is None:
        raise RuntimeError(
            "hull circumballs kept reaching the enclosing simplex even "
            "after repeated enlargement"
        )

    verts = pts[cells]
    centers, radii = batch_circumballs(verts)
    if not (np.isfinite(radii).all() and np.isfinite(centers).all()):
        raise AssertionError("degenerate cell survived construction")
    edges = verts[:, 1:, :] - verts[:, :1, :]
    volumes = np.abs(np.linalg.det(edges)) / float(math.factorial(d))

    return Triangulation(
        points=pts,
        cell_indices=cells,
        adjacency=neighbors,
        circumcenters=centers,
        circumradii=radii,
        volumes=volumes,
        engine=used_engine,
        source_points=source,
    )
