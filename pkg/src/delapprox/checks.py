"""Self-contained invariant suite behind the `check` subcommand.

Each check returns a CheckResult with a pass flag and a one-line
detail; the suite is deterministic, needs no network or external data,
and runs in a few minutes.  The heavyweight statistical validations
live in the acceptance tests; this suite covers the exact geometric
invariants plus quick statistical smoke tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constants
from .approximation import build_approximation, symdiff_volume
from .delaunay import triangulate
from .geometry import circumball, in_circumball, regular_simplex
from .pointprocess import padded_window, sample_poisson
from .rng import split_seed
from .targets import Ball, Box, covariogram, perimeter_from_covariogram

__all__ = ["CheckResult", "lemma_simplex_check", "delaunay_brute_check", "run_all_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def lemma_simplex_check(
    d: int,
    inradius: float = 1.0,
    delta: float = 0.02,
    trials: int = 1000,
    seed: int = 0,
    spheres_per_facet: int = 8,
) -> CheckResult:
    """Stability of the regular simplex under vertex perturbations.

    For the regular simplex with inradius s, perturbing each vertex
    within delta*s must (a) keep the circumcenter within s/5 of the
    original center, and (b) keep every sphere of radius >= 3 d^2 s
    through d of the perturbed vertices away from the ball of radius
    4s/5 around the original center.  Sphere centers are sampled on the
    line of points equidistant from the d chosen vertices.
    """
    s = inradius
    base = regular_simplex(d, np.zeros(d), s)
    rng = np.random.default_rng(seed)
    center_violations = 0
    sphere_violations = 0
    max_center_drift = 0.0
    for _ in range(trials):
        shift = rng.standard_normal((d + 1, d))
        shift *= (
            delta * s * rng.random((d + 1, 1)) ** (1.0 / d)
            / np.linalg.norm(shift, axis=1, keepdims=True)
        )
        pert = base + shift
        ball = circumball(pert)
        drift = float(np.linalg.norm(ball.center))
        max_center_drift = max(max_center_drift, drift)
        if drift > s / 5.0:
            center_violations += 1
        for skip in range(d + 1):
            facet = np.delete(pert, skip, axis=0)
            # equidistant centers: (v_j - v_0) . y = (|v_j|^2 - |v_0|^2)/2,
            # a line q0 + lambda * u
            a = facet[1:] - facet[0]
            b = 0.5 * (
                np.einsum("ij,ij->i", facet[1:], facet[1:])
                - np.dot(facet[0], facet[0])
            )
            q0, *_ = np.linalg.lstsq(a, b, rcond=None)
            u = _null_direction(a)
            lam0 = float(np.dot(facet[0] - q0, u))
            rad0_sq = float(np.dot(facet[0] - q0, facet[0] - q0))
            for _ in range(spheres_per_facet):
                radius = 3.0 * d * d * s * math.exp(rng.random() * math.log(10.0))
                # |y - v|^2 = |q0 - v|^2 - lam0^2 + (lam - lam0)^2 = radius^2
                gap = radius * radius - rad0_sq + lam0 * lam0
                if gap <= 0:
                    continue
                lam = lam0 + math.copysign(math.sqrt(gap), rng.random() - 0.5)
                y = q0 + lam * u
                if abs(np.linalg.norm(y) - radius) <= 0.8 * s:
                    sphere_violations += 1
    ok = center_violations == 0 and sphere_violations == 0
    return CheckResult(
        f"lemma-simplex d={d}",
        ok,
        f"{trials} perturbations, center violations {center_violations} "
        f"(max drift {max_center_drift:.4f} vs {s / 5:.4f}), "
        f"sphere violations {sphere_violations}",
    )


def _null_direction(a: np.ndarray) -> np.ndarray:
    """Unit vector spanning the null space of a (d-1) x d matrix."""
    _, _, vt = np.linalg.svd(a)
    return vt[-1]


def delaunay_brute_check(d: int, n: int, seeds=(0, 1)) -> CheckResult:
    """Exact-arithmetic verification of random triangulations.

    Every cell's circumball must contain no other input point (checked
    with the certified predicate, which falls back to rational
    arithmetic), and the cell volumes must add up to the volume of the
    convex hull.
    """
    from scipy.spatial import ConvexHull

    worst_gap = 0.0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        pts = rng.random((n, d))
        tri = triangulate(pts)
        for row in tri.cell_indices:
            cell = pts[row]
            members = set(int(i) for i in row)
            for j in range(n):
                if j in members:
                    continue
                if in_circumball(cell, pts[j]) == "inside":
                    return CheckResult(
                        f"delaunay-brute d={d}",
                        False,
                        f"seed {seed}: point {j} inside circumball of cell {row}",
                    )
        hull = ConvexHull(pts).volume
        worst_gap = max(worst_gap, abs(tri.total_volume - hull) / hull)
    ok = worst_gap <= 1e-9
    return CheckResult(
        f"delaunay-brute d={d}",
        ok,
        f"{len(seeds)} clouds of {n}: empty circumballs, "
        f"hull-volume gap {worst_gap:.2e}",
    )


def _check_constants() -> list:
    out = []
    gaps = []
    for d in range(2, 7):
        lhs = constants.s_ddk(d, 2)
        rhs = (d + 1) / math.factorial(d - 1) * constants.kappa(d) ** (d + 1)
        gaps.append(abs(lhs - rhs) / rhs)
    out.append(
        CheckResult(
            "moment-identity",
            max(gaps) <= 1e-12,
            f"S(d,d,2) closed form vs kappa identity, d=2..6, max gap {max(gaps):.2e}",
        )
    )
    bound = constants.rx_tail_bound(2, 5.0, 0, 0.0)
    lo, hi = constants.c_d_bounds(2)
    ref = 0.3232068933984977
    out.append(
        CheckResult(
            "frozen-constants",
            abs(bound - 6.0) <= 1e-9 and lo < ref < hi,
            f"rx bound(d=2,k=0,s=0) = {bound:.12f} (expect 6), "
            f"c_2 bounds ({lo:.4f}, {hi:.4f}) bracket {ref:.4f}",
        )
    )
    checks = constants.bp_identity_check(2, samples=10**6, seed=1)
    gap = max(c.rel_gap for c in checks)
    out.append(
        CheckResult(
            "blaschke-petkantschin",
            gap <= 0.03,
            f"d=2 at 1e6 samples, max relative gap {gap:.4f} (tol 0.03)",
        )
    )
    return out


def _check_targets() -> list:
    out = []
    rng = np.random.default_rng(2)
    worst = 0.0
    for t in (Ball(1.0), Box([0.7, 1.3])):
        for x in rng.uniform(-1.5, 1.5, size=(100, 2)):
            worst = max(worst, abs(covariogram(t, x) - covariogram(t, -x)))
    out.append(
        CheckResult("covariogram-even", worst <= 1e-10, f"max asymmetry {worst:.2e}")
    )
    per_gap = max(
        abs(perimeter_from_covariogram(Ball(1.0)) - 2 * math.pi) / (2 * math.pi),
        abs(perimeter_from_covariogram(Box([1.0, 1.0])) - 4.0) / 4.0,
    )
    out.append(
        CheckResult(
            "perimeter-recovery",
            per_gap <= 0.01,
            f"disk and unit box via covariogram, max relative error {per_gap:.2e}",
        )
    )
    return out


def _check_pipeline() -> CheckResult:
    target = Ball(1.0)
    vols = []
    for i in range(60):
        w = padded_window(target, 300.0)
        sample = sample_poisson(w, 300.0, seed=split_seed(77, i))
        tri = triangulate(sample)
        vols.append(build_approximation(tri, target).volume_estimate)
    vols = np.array(vols)
    se = vols.std(ddof=1) / math.sqrt(len(vols))
    z = (vols.mean() - math.pi) / se
    return CheckResult(
        "volume-unbiasedness",
        abs(z) <= 4.0,
        f"60 replications at t=300: mean {vols.mean():.4f} vs pi, z = {z:+.2f}",
    )


def _check_symdiff_exact_zero() -> CheckResult:
    from .approximation import ApproximationResult
    from .targets import ConvexPolygon

    xs = np.arange(-2.0, 3.0)
    pts = np.array([[x, y] for x in xs for y in xs])
    from .pointprocess import PointSample, Window

    sample = PointSample(pts, 1.0, 0, Window([-9.0, -9.0], [9.0, 9.0]))
    tri = triangulate(sample)
    ci = tri.n_cells // 2
    target = ConvexPolygon(tri.points[tri.cell_indices[ci]])
    res = ApproximationResult(
        selected_cell_indices=np.array([ci], dtype=np.int64),
        volume_estimate=float(tri.volumes[ci]),
        leakage_count=0,
    )
    est = symdiff_volume(tri, res, target, seed=5)
    return CheckResult(
        "symdiff-identical-sets",
        est.value == 0.0,
        f"forced single-cell target: estimate {est.value!r}",
    )


def run_all_checks() -> list:
    """All invariant checks, in a stable order."""
    results = []
    results.extend(_check_constants())
    results.append(delaunay_brute_check(2, 140, seeds=(0, 1, 2)))
    results.append(delaunay_brute_check(3, 90, seeds=(0, 1)))
    results.append(lemma_simplex_check(2))
    results.append(lemma_simplex_check(3))
    results.extend(_check_targets())
    results.append(_check_pipeline())
    results.append(_check_symdiff_exact_zero())
    return results
