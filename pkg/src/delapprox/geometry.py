"""Simplex geometry with sign-safe predicates.

Volumes, circumballs and the lifted in-sphere test for simplices in
arbitrary dimension.  Predicates are evaluated in floating point with a
forward error bound; whenever the bound cannot certify the sign, the
determinant is re-evaluated in exact rational arithmetic, so the
classification returned by :func:`in_circumball` is always correct.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

EPS = float(np.finfo(np.float64).eps)

# Forward error multipliers for the cofactor-expanded determinants.
# Deliberately looser than the tightest known constants; an over-wide
# bound only triggers a harmless exact re-evaluation.
_ORIENT_ERR = 16.0 * EPS
_INSPHERE_ERR = {2: 32.0 * EPS, 3: 64.0 * EPS}

# Relative tolerance below which a vertex set is treated as affinely
# dependent when a circumball is requested.
DEGENERACY_RTOL = 1e-12


class DegenerateSimplexError(ValueError):
    """Raised when an operation requires affinely independent vertices."""


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball given by center and radius."""

    center: np.ndarray
    radius: float

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class Simplex:
    """Simplex described by its d+1 vertices, one per row.

    The row order fixes the orientation; geometric quantities do not
    depend on it.
    """

    vertices: np.ndarray

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def volume(self) -> float:
        return simplex_volume(self.vertices)

    def circumball(self) -> Ball:
        return circumball(self.vertices)


def _as_vertex_array(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
        raise ValueError(
            f"expected d+1 vertices of dimension d, got array of shape {v.shape}"
        )
    return v


def signed_volume(vertices) -> float:
    """Signed volume det(v_1-v_0, ..., v_d-v_0) / d! of a simplex."""
    v = _as_vertex_array(vertices)
    d = v.shape[1]
    edges = v[1:] - v[0]
    return float(np.linalg.det(edges)) / math.factorial(d)


def simplex_volume(vertices) -> float:
    """Volume of the simplex spanned by d+1 points in R^d.

    Parameters
    ----------
    vertices : array_like, shape (d+1, d)
        One vertex per row.

    Returns
    -------
    float
        The d-dimensional Lebesgue volume; 0.0 for affinely dependent
        vertices.
    """
    return abs(signed_volume(vertices))


def circumball(vertices) -> Ball:
    """Circumball of a non-degenerate simplex.

    The center is the unique point equidistant from all vertices,
    obtained from the linear system 2 (v_i - v_0) . y = |v_i - v_0|^2
    in coordinates shifted to v_0.

    Raises
    ------
    DegenerateSimplexError
        If the vertices are affinely dependent relative to their spread
        (determinant below ``DEGENERACY_RTOL`` after scaling).
    """
    v = _as_vertex_array(vertices)
    d = v.shape[1]
    edges = v[1:] - v[0]
    scale = float(np.max(np.abs(edges))) if edges.size else 0.0
    if scale == 0.0:
        raise DegenerateSimplexError("all vertices coincide")
    det = np.linalg.det(edges)
    if abs(det) <= DEGENERACY_RTOL * scale**d:
        # scale**d can underflow to zero for tiny simplices in high d
        rel = abs(det) / scale**d if scale**d > 0.0 else 0.0
        raise DegenerateSimplexError(
            f"affinely dependent vertices (relative determinant {rel:.3e})"
        )
    rhs = 0.5 * np.einsum("ij,ij->i", edges, edges)
    y = np.linalg.solve(edges, rhs)
    center = v[0] + y
    return Ball(center=center, radius=float(np.linalg.norm(y)))


# ---------------------------------------------------------------------------
# In-sphere predicate
# ---------------------------------------------------------------------------
#
# With rows u_i = (v_i - p, |v_i - p|^2) the (d+1)x(d+1) determinant D
# satisfies  D = (-1)^d (R^2 - |p - c|^2) det(v_1-v_0, ..., v_d-v_0),
# so sign((-1)^d D) * sign(orientation) classifies p against the
# circumsphere.  Both determinants are expanded by cofactors together
# with a permanent (same expansion on absolute values) that yields the
# forward error bound.


def _det2(a, b, c, d):
    return a * d - b * c


def _incircle2(v, p):
    """2D lifted determinant and error bound, expansion along the lift column."""
    adx = v[0, 0] - p[0]
    ady = v[0, 1] - p[1]
    bdx = v[1, 0] - p[0]
    bdy = v[1, 1] - p[1]
    cdx = v[2, 0] - p[0]
    cdy = v[2, 1] - p[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    ma = bdx * cdy - bdy * cdx
    mb = adx * cdy - ady * cdx
    mc = adx * bdy - ady * bdx
    det = alift * ma - blift * mb + clift * mc
    perm = (
        alift * (abs(bdx * cdy) + abs(bdy * cdx))
        + blift * (abs(adx * cdy) + abs(ady * cdx))
        + clift * (abs(adx * bdy) + abs(ady * bdx))
    )
    return det, _INSPHERE_ERR[2] * perm


def _insphere3(v, p):
    """3D lifted determinant and error bound."""
    dx = v[:, 0] - p[0]
    dy = v[:, 1] - p[1]
    dz = v[:, 2] - p[2]
    lift = dx * dx + dy * dy + dz * dz

    def minor(i, j, k):
        return (
            dx[i] * (dy[j] * dz[k] - dy[k] * dz[j])
            - dy[i] * (dx[j] * dz[k] - dx[k] * dz[j])
            + dz[i] * (dx[j] * dy[k] - dx[k] * dy[j])
        )

    def minor_abs(i, j, k):
        return (
            abs(dx[i]) * (abs(dy[j] * dz[k]) + abs(dy[k] * dz[j]))
            + abs(dy[i]) * (abs(dx[j] * dz[k]) + abs(dx[k] * dz[j]))
            + abs(dz[i]) * (abs(dx[j] * dy[k]) + abs(dx[k] * dy[j]))
        )

    det = (
        -lift[0] * minor(1, 2, 3)
        + lift[1] * minor(0, 2, 3)
        - lift[2] * minor(0, 1, 3)
        + lift[3] * minor(0, 1, 2)
    )
    perm = (
        lift[0] * minor_abs(1, 2, 3)
        + lift[1] * minor_abs(0, 2, 3)
        + lift[2] * minor_abs(0, 1, 3)
        + lift[3] * minor_abs(0, 1, 2)
    )
    return det, _INSPHERE_ERR[3] * perm


def _orient2(v):
    t1 = (v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1])
    t2 = (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0])
    return t1 - t2, _ORIENT_ERR * (abs(t1) + abs(t2))


def _orient3(v):
    e = v[1:] - v[0]
    m0 = e[1, 1] * e[2, 2] - e[1, 2] * e[2, 1]
    m1 = e[1, 0] * e[2, 2] - e[1, 2] * e[2, 0]
    m2 = e[1, 0] * e[2, 1] - e[1, 1] * e[2, 0]
    det = e[0, 0] * m0 - e[0, 1] * m1 + e[0, 2] * m2
    perm = (
        abs(e[0, 0]) * (abs(e[1, 1] * e[2, 2]) + abs(e[1, 2] * e[2, 1]))
        + abs(e[0, 1]) * (abs(e[1, 0] * e[2, 2]) + abs(e[1, 2] * e[2, 0]))
        + abs(e[0, 2]) * (abs(e[1, 0] * e[2, 1]) + abs(e[1, 1] * e[2, 0]))
    )
    return det, _ORIENT_ERR * perm


def _generic_det_with_bound(m):
    """np.linalg.det with a deliberately crude Hadamard-style bound."""
    det = float(np.linalg.det(m))
    hadamard = float(np.prod(np.linalg.norm(m, axis=1)))
    return det, 1e-7 * hadamard


def _frac_det(rows):
    """Exact determinant of a list-of-lists of Fractions, by cofactor expansion."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = Fraction(0)
    sign = 1
    for j in range(n):
        pivot = rows[0][j]
        if pivot != 0:
            minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
            total += sign * pivot * _frac_det(minor)
        sign = -sign
    return total


def _exact_insphere_signs(v, p):
    """Exact signs of the lifted determinant and of the orientation."""
    d = v.shape[1]
    fp = [Fraction(float(x)) for x in p]
    fv = [[Fraction(float(x)) for x in row] for row in v]
    diffs = [[fv[i][j] - fp[j] for j in range(d)] for i in range(d + 1)]
    lifted = [row + [sum(x * x for x in row)] for row in diffs]
    det = _frac_det(lifted)
    edges = [[fv[i][j] - fv[0][j] for j in range(d)] for i in range(1, d + 1)]
    orient = _frac_det(edges)
    sgn = lambda x: (x > 0) - (x < 0)
    return sgn(det), sgn(orient)


def in_circumball(vertices, point) -> str:
    """Classify a point against the circumsphere of a simplex.

    Parameters
    ----------
    vertices : array_like, shape (d+1, d)
    point : array_like, shape (d,)

    Returns
    -------
    str
        ``"inside"``, ``"on"`` or ``"outside"``.  The result is exact:
        the floating-point determinant is only trusted when it clears a
        forward error bound, otherwise the sign is recomputed in
        rational arithmetic.

    Raises
    ------
    DegenerateSimplexError
        If the vertices are affinely dependent (no circumsphere).
    """
    v = _as_vertex_array(vertices)
    p = np.asarray(point, dtype=np.float64)
    d = v.shape[1]

    if d == 2:
        det, errb = _incircle2(v, p)
        odet, oerrb = _orient2(v)
    elif d == 3:
        det, errb = _insphere3(v, p)
        odet, oerrb = _orient3(v)
    else:
        diffs = v - p
        lifted = np.column_stack([diffs, np.einsum("ij,ij->i", diffs, diffs)])
        det, errb = _generic_det_with_bound(lifted)
        odet, oerrb = _generic_det_with_bound(v[1:] - v[0])

    if abs(det) <= errb or abs(odet) <= oerrb:
        dsign, osign = _exact_insphere_signs(v, p)
    else:
        dsign = 1 if det > 0 else -1
        osign = 1 if odet > 0 else -1

    if osign == 0:
        raise DegenerateSimplexError("affinely dependent vertices")
    if dsign == 0:
        return "on"
    inside = ((-1) ** d) * dsign * osign > 0
    return "inside" if inside else "outside"


def batch_circumballs(vertices: np.ndarray):
    """Circumcenters and radii for a stack of simplices at once.

    Parameters
    ----------
    vertices : ndarray, shape (n, d+1, d)

    Returns
    -------
    centers : ndarray, shape (n, d)
    radii : ndarray, shape (n,)
        NaN rows mark (numerically) degenerate simplices.
    """
    v = np.asarray(vertices, dtype=np.float64)
    n, _, d = v.shape
    edges = v[:, 1:, :] - v[:, :1, :]
    rhs = 0.5 * np.einsum("nij,nij->ni", edges, edges)
    dets = np.linalg.det(edges)
    scale = np.max(np.abs(edges), axis=(1, 2))
    ok = np.abs(dets) > DEGENERACY_RTOL * np.maximum(scale, 1e-300) ** d
    centers = np.full((n, d), np.nan)
    radii = np.full(n, np.nan)
    if np.any(ok):
        y = np.linalg.solve(edges[ok], rhs[ok][..., None])[..., 0]
        centers[ok] = v[ok, 0, :] + y
        radii[ok] = np.linalg.norm(y, axis=1)
    return centers, radii


def point_in_simplex(vertices, point, tol: float = 1e-12) -> bool:
    """Whether a point lies in the closed simplex, via barycentric coordinates.

    A point is accepted when every barycentric coordinate is at least
    ``-tol``, so boundary points pass at the default tolerance.
    """
    v = _as_vertex_array(vertices)
    p = np.asarray(point, dtype=np.float64)
    edges = v[1:] - v[0]
    scale = float(np.max(np.abs(edges)))
    if scale == 0.0 or abs(np.linalg.det(edges)) <= DEGENERACY_RTOL * scale ** v.shape[1]:
        raise DegenerateSimplexError("affinely dependent vertices")
    lam = np.linalg.solve(edges.T, p - v[0])
    if np.min(lam) < -tol:
        return False
    return bool(1.0 - float(np.sum(lam)) >= -tol)


def barycentric_coordinates(vertices, point) -> np.ndarray:
    """All d+1 barycentric coordinates of ``point`` with respect to the simplex."""
    v = _as_vertex_array(vertices)
    p = np.asarray(point, dtype=np.float64)
    edges = v[1:] - v[0]
    lam = np.linalg.solve(edges.T, p - v[0])
    return np.concatenate([[1.0 - float(np.sum(lam))], lam])


def regular_simplex(dim: int, center, inradius: float, axis=None) -> np.ndarray:
    """Vertices of a regular simplex with prescribed center and inradius.

    Parameters
    ----------
    dim : int
        Ambient dimension d >= 1.
    center : array_like, shape (d,)
        Common circumcenter and incenter.
    inradius : float
        Distance from the center to each facet; the circumradius is
        d times this value.
    axis : array_like, shape (d,), optional
        Direction from the center to the apex vertex.  Defaults to the
        last coordinate axis.

    Returns
    -------
    ndarray, shape (d+1, d)
        Vertex rows: the apex at ``center + d*inradius*axis`` first,
        then the d base vertices in the hyperplane at signed distance
        ``-inradius`` along the axis.
    """
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    if inradius <= 0:
        raise ValueError("inradius must be positive")
    c = np.asarray(center, dtype=np.float64)
    if c.shape != (dim,):
        raise ValueError(f"center must have shape ({dim},)")
    if axis is None:
        a = np.zeros(dim)
        a[-1] = 1.0
    else:
        a = np.asarray(axis, dtype=np.float64)
        norm = np.linalg.norm(a)
        if norm == 0:
            raise ValueError("axis direction must be nonzero")
        a = a / norm

    s = float(inradius)
    big_r = dim * s
    verts = np.empty((dim + 1, dim))
    verts[0] = c + big_r * a

    m = dim - 1
    if m == 0:
        verts[1] = c - s * a
        return verts

    # Regular (m)-simplex with unit circumradius in R^m: center the
    # standard basis of R^{m+1} and express it in an orthonormal basis
    # of the sum-zero subspace.
    centered = np.eye(m + 1) - np.full((m + 1, m + 1), 1.0 / (m + 1))
    basis, _ = np.linalg.qr(centered[:, :m])  # (m+1, m), spans the row space
    w = centered @ basis
    w *= math.sqrt((m + 1) / m)  # circumradius 1

    # Orthonormal completion of the axis inside R^d.
    q, r = np.linalg.qr(np.column_stack([a, np.eye(dim)]))
    if np.dot(q[:, 0], a) < 0:
        q = -q
    perp = q[:, 1 : dim]  # (d, d-1)

    rho = math.sqrt(big_r**2 - s**2)
    verts[1:] = c - s * a + rho * (w @ perp.T)
    return verts
