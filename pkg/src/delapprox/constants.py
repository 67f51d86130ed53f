"""Geometric constants governing the approximation error.

Ball volumes, the moments S(d,d,k) of the volume of a simplex with
vertices on a sphere, closed-form bounds on the limiting constant c_d of
the rescaled symmetric difference, a Monte Carlo estimator for c_d
itself, the analytic tail bound for the circumradius of the Voronoi
cell around an inserted point, and Monte Carlo verification of the two
Blaschke-Petkantschin decompositions (full space, and through the
origin) that those formulas rest on.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .geometry import batch_circumballs
from .rng import split_seed

_BATCH = 1 << 19


def kappa(d: int) -> float:
    """Volume of the d-dimensional unit ball, pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 0:
        raise ValueError("dimension must be nonnegative")
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def omega(d: int) -> float:
    """Surface content of the unit sphere S^(d-1), equal to d * kappa(d)."""
    if d < 1:
        raise ValueError("omega(d) requires d >= 1")
    return d * kappa(d)


def s_ddk(d: int, k: int) -> float:
    """Moment S(d,d,k): the integral of lambda_d([u_0,...,u_d])^k over
    d+1 unit vectors, each against the (unnormalized) spherical measure.

    Closed form:

        S(d,d,k) = omega_{d+k}^{d+1} kappa_{d(d+k-2)+d-2}
                   / ( (d!)^k kappa_{(d+1)(d+k-2)} c_{(d+k)d} ),

    with c_{md} = (omega_{k+1} ... omega_{d+k}) / (omega_1 ... omega_d).
    """
    if d < 2:
        raise ValueError("s_ddk requires d >= 2")
    if k < 0:
        raise ValueError("k must be a nonnegative integer")
    num = omega(d + k) ** (d + 1) * kappa(d * (d + k - 2) + d - 2)
    c_md = 1.0
    for i in range(k + 1, d + k + 1):
        c_md *= omega(i)
    for i in range(1, d + 1):
        c_md /= omega(i)
    den = math.factorial(d) ** k * kappa((d + 1) * (d + k - 2)) * c_md
    return num / den


def c_d_voronoi(d: int) -> float:
    """Limiting symmetric-difference constant of the Poisson-Voronoi
    approximation, 2 d^-2 kappa_{d-1} kappa_d^{-1-1/d} Gamma(1/d)."""
    if d < 2:
        raise ValueError("requires d >= 2")
    return 2.0 * d**-2.0 * kappa(d - 1) * kappa(d) ** (-1.0 - 1.0 / d) * math.gamma(1.0 / d)


def c_d_bounds(d: int) -> tuple[float, float]:
    """Closed-form lower and upper bounds for the Delaunay constant c_d.

    upper = 2 d^-2 kappa_{d-1} kappa_d^{-1-1/d} Gamma(d+1+1/d) / (d-1)!
    lower = upper * [ S(d,d,2) / (d kappa_d S(d,d,1)) ]^{1/(d-1)}
    """
    if d < 2:
        raise ValueError("requires d >= 2")
    upper = (
        2.0
        * d**-2.0
        * kappa(d - 1)
        * kappa(d) ** (-1.0 - 1.0 / d)
        * math.gamma(d + 1.0 + 1.0 / d)
        / math.factorial(d - 1)
    )
    ratio = s_ddk(d, 2) / (d * kappa(d) * s_ddk(d, 1))
    lower = upper * ratio ** (1.0 / (d - 1))
    return lower, upper


def rx_tail_bound(d: int, t: float, k: int, s: float) -> float:
    """Upper bound for E[ r^k 1(r >= s) ] where r is the circumradius of
    the Voronoi cell around a point inserted into the process.

    Evaluates S(d,d,1) t^d * integral_s^inf exp(-t kappa_d r^d) r^(d^2+k-1) dr
    by adaptive quadrature.  Valid for intensities t >= 1.
    """
    if t < 1.0:
        raise ValueError("the tail bound requires t >= 1")
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    kd = kappa(d)
    m = d * d + k
    a = m / d
    # Substituting v = t kappa_d r^d keeps the integrand O(1)-scaled for
    # every intensity; for s > 0 shift by the lower limit so the
    # quadrature never chases a vanishing tail.
    z0 = t * kd * s**d
    if z0 == 0.0:
        val, _ = integrate.quad(lambda v: math.exp(-v) * v ** (a - 1.0), 0.0, np.inf, limit=200)
    else:
        val, _ = integrate.quad(
            lambda w: math.exp(-w) * (w + z0) ** (a - 1.0), 0.0, np.inf, limit=200
        )
        val *= math.exp(-z0)
    return s_ddk(d, 1) * t**d / d * (t * kd) ** (-a) * val


# ---------------------------------------------------------------------------
# Streaming Monte Carlo plumbing
# ---------------------------------------------------------------------------


def _merge_moments(a, b):
    """Combine two (count, mean, M2) running-moment triples."""
    n1, m1, s1 = a
    n2, m2, s2 = b
    if n2 == 0:
        return a
    if n1 == 0:
        return b
    n = n1 + n2
    delta = m2 - m1
    mean = m1 + delta * (n2 / n)
    m2tot = s1 + s2 + delta * delta * (n1 * n2 / n)
    return (n, mean, m2tot)


def _moments(values: np.ndarray):
    n = values.size
    if n == 0:
        return (0, 0.0, 0.0)
    mean = float(np.mean(values))
    m2 = float(np.sum((values - mean) ** 2))
    return (n, mean, m2)


def _run_batches(batch_fn, args, total, seed, workers):
    """Evaluate ``batch_fn(*args, n, seed_i)`` over fixed-size batches and
    merge the moment triples in batch order, so the result does not
    depend on the worker count."""
    sizes = []
    left = int(total)
    while left > 0:
        take = min(_BATCH, left)
        sizes.append(take)
        left -= take
    seeds = [split_seed(seed, i) for i in range(len(sizes))]
    if workers and workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(batch_fn, *zip(*[(args + (n, s)) for n, s in zip(sizes, seeds)]))
            )
    else:
        results = [batch_fn(*(args + (n, s))) for n, s in zip(sizes, seeds)]
    acc = (0, 0.0, 0.0)
    for r in results:
        acc = _merge_moments(acc, r)
    return acc


def _uniform_sphere(rng, n, d):
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x


def _simplex_volumes(u: np.ndarray) -> np.ndarray:
    """Volumes of simplices stacked as (n, d+1, d)."""
    d = u.shape[2]
    edges = u[:, 1:, :] - u[:, :1, :]
    return np.abs(np.linalg.det(edges)) / math.factorial(d)


def _contains_on_axis(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Whether the point (x, 0, ..., 0) lies in the simplex conv(u_0..u_d)."""
    n, _, d = u.shape
    edges = np.transpose(u[:, 1:, :] - u[:, :1, :], (0, 2, 1))
    dets = np.linalg.det(edges)
    good = np.abs(dets) > 1e-300
    b = -u[:, 0, :].copy()
    b[:, 0] += x
    safe = np.where(good[:, None, None], edges, np.eye(d)[None])
    lam = np.linalg.solve(safe, b[..., None])[..., 0]
    lam0 = 1.0 - lam.sum(axis=1)
    return good & (lam.min(axis=1) >= 0.0) & (lam0 >= 0.0)


# --- c_d estimator ---------------------------------------------------------


def _cd_batch(d, n, seed):
    rng = np.random.default_rng(seed)
    u = _uniform_sphere(rng, n * (d + 1), d).reshape(n, d + 1, d)
    x = rng.uniform(0.0, 1.0, size=n)
    vols = _simplex_volumes(u)
    inside = _contains_on_axis(u, x)
    g = np.where(inside, vols * x**d, 0.0)
    return _moments(g)


@dataclass(frozen=True)
class CdEstimate:
    d: int
    value: float
    stderr: float
    integral: float
    integral_stderr: float
    samples: int
    seed: int


def estimate_c_d(d: int, samples: int = 10**7, seed: int = 0, workers: int = 1) -> CdEstimate:
    """Monte Carlo estimate of the limiting constant c_d.

    Draws d+1 directions uniformly on the sphere and x uniformly on
    [0,1]; the target integral I_d is omega_d^(d+1) times the mean of
    1{x e_1 in conv(u)} lambda_d([u]) x^d, and

        c_d = 2/(d(d+1)) kappa_{d-1} kappa_d^{-d-1-1/d} Gamma(d+1+1/d) I_d.

    Deterministic for fixed (d, samples, seed); the worker count only
    affects wall time, not the result.
    """
    if d < 2:
        raise ValueError("requires d >= 2")
    if samples < 2:
        raise ValueError("need at least two samples")
    n, mean, m2 = _run_batches(_cd_batch, (d,), samples, seed, workers)
    scale = omega(d) ** (d + 1)
    integral = scale * mean
    integral_se = scale * math.sqrt(m2 / (n - 1) / n)
    pref = (
        2.0
        / (d * (d + 1))
        * kappa(d - 1)
        * kappa(d) ** (-d - 1.0 - 1.0 / d)
        * math.gamma(d + 1.0 + 1.0 / d)
    )
    return CdEstimate(
        d=d,
        value=pref * integral,
        stderr=pref * integral_se,
        integral=integral,
        integral_stderr=integral_se,
        samples=samples,
        seed=seed,
    )


# --- Blaschke-Petkantschin identity checks ---------------------------------

_RHO = 2.0  # radius cap shared by both fixtures
_BOX = 6.0  # hard cutoff making the fixtures compactly supported


def _bp_full_lhs_batch(d, scale, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d + 1, d))
    _, radii = batch_circumballs(x)
    ind = (np.nanmax(np.abs(x), axis=(1, 2)) <= _BOX) & (radii <= _RHO)
    weight = scale * (2.0 * math.pi) ** (d * (d + 1) / 2.0)
    return _moments(np.where(ind & np.isfinite(radii), weight, 0.0))


def _trunc_gamma_radius(rng, rate, k, rmax):
    """Sample r with density ~ r^(2k-1) exp(-rate r^2) on (0, rmax), and
    return (r, w) where w = r^(2k-1) exp(-rate r^2) / q(r) is the
    importance weight (a function of rate only)."""
    from scipy.special import gammainc, gammaincinv, gammaln

    n = rate.shape[0]
    v = rng.uniform(0.0, 1.0, size=n)
    z = rate * rmax * rmax
    small = z < 1e-8
    y = np.empty(n)
    w = np.empty(n)
    if np.any(small):
        y[small] = rmax * rmax * v[small] ** (1.0 / k)
        w[small] = rmax ** (2.0 * k) / (2.0 * k)
    big = ~small
    if np.any(big):
        fmax = gammainc(k, z[big])
        y[big] = gammaincinv(k, v[big] * fmax) / rate[big]
        w[big] = np.exp(gammaln(k) + np.log(fmax) - k * np.log(rate[big])) / 2.0
    return np.sqrt(y), w


def _bp_full_rhs_batch(d, scale, n, seed):
    # Proposal matched to the Gaussian window: directions first, then the
    # radius from a truncated Gamma law whose rate depends on the
    # directions, then the center from a shifted Gaussian.  All the
    # exponential and polynomial factors cancel, leaving a bounded weight.
    rng = np.random.default_rng(seed)
    u = _uniform_sphere(rng, n * (d + 1), d).reshape(n, d + 1, d)
    su = u.sum(axis=1)
    a2 = np.maximum((d + 1.0) - np.einsum("ni,ni->n", su, su) / (d + 1.0), 0.0)
    r, wr = _trunc_gamma_radius(rng, 0.5 * a2, d * d / 2.0, _RHO)
    c = -r[:, None] * su / (d + 1.0) + rng.standard_normal((n, d)) / math.sqrt(d + 1.0)
    pts = c[:, None, :] + r[:, None, None] * u
    ind = np.max(np.abs(pts), axis=(1, 2)) <= _BOX
    vols = _simplex_volumes(u)
    w = (
        scale
        * math.factorial(d)
        * omega(d) ** (d + 1)
        * (2.0 * math.pi) ** (d / 2.0)
        * (d + 1.0) ** (-d / 2.0)
        * wr
        * vols
    )
    return _moments(np.where(ind, w, 0.0))


def _bp_origin_lhs_batch(d, scale, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d, d))
    pts = np.concatenate([np.zeros((n, 1, d)), x], axis=1)
    centers, _ = batch_circumballs(pts)
    cnorm = np.linalg.norm(centers, axis=1)
    ind = (np.max(np.abs(x), axis=(1, 2)) <= _BOX) & np.isfinite(cnorm) & (cnorm <= _RHO)
    weight = scale * (2.0 * math.pi) ** (d * d / 2.0)
    return _moments(np.where(ind, weight, 0.0))


def _bp_origin_rhs_batch(d, scale, n, seed):
    rng = np.random.default_rng(seed)
    u = _uniform_sphere(rng, n, d)
    ui = _uniform_sphere(rng, n * d, d).reshape(n, d, d)
    su = ui.sum(axis=1)
    # |sum_i r(u+u_i)|^2 has Gaussian exponent rate d + <u, sum u_i> in r^2
    b2 = np.maximum(2.0 * d + 2.0 * np.einsum("ni,ni->n", u, su), 0.0)
    r, wr = _trunc_gamma_radius(rng, 0.5 * b2, d * d / 2.0, _RHO)
    pts = r[:, None, None] * (u[:, None, :] + ui)
    ind = np.max(np.abs(pts), axis=(1, 2)) <= _BOX
    simplex = np.concatenate([ui, -u[:, None, :]], axis=1)
    vols = _simplex_volumes(simplex)
    w = scale * math.factorial(d) * omega(d) ** (d + 1) * wr * vols
    return _moments(np.where(ind, w, 0.0))


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float

    @property
    def rel_gap(self) -> float:
        mid = 0.5 * (abs(self.lhs) + abs(self.rhs))
        return abs(self.lhs - self.rhs) / mid if mid > 0 else 0.0


def bp_identity_check(d: int, samples: int = 10**7, seed: int = 0, workers: int = 1, scale: float = 1.0):
    """Check both spherical decomposition identities by Monte Carlo.

    The test function is a Gaussian-windowed indicator: a standard
    Gaussian in all points, cut to max-norm <= 6 and to circumradius
    <= 2 (radius of the sphere through the points, respectively through
    the points and the origin).  Left side: direct sampling in
    Cartesian coordinates.  Right side: sampling in the center/radius/
    direction parametrization with the r^(d^2-1) lambda_d([u]) kernel.

    ``scale`` multiplies the test function; both sides are linear in
    it, so scale=0 must give exact zeros and scale=2 exactly doubled
    estimates for the same seed.

    Returns a list of two :class:`IdentityCheck` results, one for the
    full-space identity (d+1 points) and one for the through-origin
    identity (d points).
    """
    if d < 2:
        raise ValueError("requires d >= 2")
    out = []
    specs = [
        ("full_space", _bp_full_lhs_batch, _bp_full_rhs_batch),
        ("through_origin", _bp_origin_lhs_batch, _bp_origin_rhs_batch),
    ]
    for j, (name, lhs_fn, rhs_fn) in enumerate(specs):
        nl, ml, sl = _run_batches(lhs_fn, (d, scale), samples, split_seed(seed, 1000 + j), workers)
        nr, mr, sr = _run_batches(rhs_fn, (d, scale), samples, split_seed(seed, 2000 + j), workers)
        out.append(
            IdentityCheck(
                name=name,
                lhs=ml,
                lhs_stderr=math.sqrt(sl / (nl - 1) / nl),
                rhs=mr,
                rhs_stderr=math.sqrt(sr / (nr - 1) / nr),
            )
        )
    return out
