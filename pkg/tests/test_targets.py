import math

import numpy as np
import pytest
import shapely.geometry as sg
from shapely import affinity

from delapprox.pointprocess import padded_window
from delapprox.targets import (
    Ball,
    Box,
    ConvexPolygon,
    Covariogram,
    Ellipse,
    covariogram,
    distance_to_boundary,
    make_target,
    perimeter_from_covariogram,
    steiner_volume,
)

HEX = [(math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)) for k in range(6)]

# Gauss-Legendre arclength of the (2, 0.8) ellipse, frozen from an
# independent 200-node quadrature.
ELL_PER = 9.205245038265938


def shapely_of(target, quad_segs=4096):
    if isinstance(target, Ball):
        assert target.dim == 2
        return sg.Point(0, 0).buffer(target.radius, quad_segs=quad_segs)
    if isinstance(target, Box):
        s = target.sides
        return sg.Polygon([(0, 0), (s[0], 0), (s[0], s[1]), (0, s[1])])
    if isinstance(target, Ellipse):
        disk = sg.Point(0, 0).buffer(1.0, quad_segs=quad_segs)
        return affinity.scale(disk, target.a, target.b)
    return sg.Polygon(target.vertices)


ALL_2D = [
    Ball(1.0),
    Ball(0.7),
    Box([1.0, 1.0]),
    Box([0.7, 1.3]),
    Ellipse(2.0, 0.8),
    ConvexPolygon(HEX),
    ConvexPolygon([(0, 0), (1, 0), (0, 1)]),
]


class TestCatalog:
    def test_ball_quantities(self):
        b = Ball(2.0)
        assert b.volume == pytest.approx(4 * math.pi)
        assert b.perimeter == pytest.approx(4 * math.pi)
        assert b.inradius == 2.0
        b3 = Ball(1.5, dim=3)
        assert b3.volume == pytest.approx(4 / 3 * math.pi * 1.5**3)
        assert b3.perimeter == pytest.approx(4 * math.pi * 1.5**2)

    def test_box_quantities(self):
        b = Box([0.7, 1.3])
        assert b.volume == pytest.approx(0.91)
        assert b.perimeter == pytest.approx(4.0)
        assert b.inradius == pytest.approx(0.35)
        b3 = Box([1.0, 2.0, 3.0])
        assert b3.volume == pytest.approx(6.0)
        assert b3.perimeter == pytest.approx(22.0)
        assert b3.inradius == pytest.approx(0.5)

    def test_ellipse_quantities(self):
        e = Ellipse(2.0, 0.8)
        assert e.volume == pytest.approx(math.pi * 1.6)
        assert e.perimeter == pytest.approx(ELL_PER, rel=1e-12)
        assert e.inradius == 0.8
        # circular special case collapses to the ball formulas
        c = Ellipse(1.3, 1.3)
        assert c.perimeter == pytest.approx(2 * math.pi * 1.3)

    def test_hexagon_quantities(self):
        h = ConvexPolygon(HEX)
        assert h.volume == pytest.approx(3 * math.sqrt(3) / 2, rel=1e-12)
        assert h.perimeter == pytest.approx(6.0, rel=1e-12)
        assert h.inradius == pytest.approx(math.sqrt(3) / 2, rel=1e-6)

    def test_clockwise_vertices_are_normalized(self):
        p = ConvexPolygon(list(reversed(HEX)))
        assert p.volume == pytest.approx(3 * math.sqrt(3) / 2, rel=1e-12)

    def test_factory(self):
        assert isinstance(make_target("ball", radius=1.0, dim=3), Ball)
        assert isinstance(make_target("box", sides=[1, 2]), Box)
        assert isinstance(make_target("ellipse", a=1.0, b=2.0), Ellipse)
        assert isinstance(
            make_target("convex-polygon", vertices=HEX), ConvexPolygon
        )
        with pytest.raises(ValueError, match="unknown target kind"):
            make_target("torus", radius=1.0)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            Ball(0.0)
        with pytest.raises(ValueError):
            Ball(-1.0)
        with pytest.raises(ValueError):
            Box([1.0, 0.0])
        with pytest.raises(ValueError):
            Ellipse(1.0, -2.0)
        with pytest.raises(ValueError):
            ConvexPolygon([(0, 0), (1, 0)])
        with pytest.raises(ValueError):
            ConvexPolygon([(0, 0), (1, 0), (2, 0), (1, 1)])  # collinear run
        with pytest.raises(ValueError):
            ConvexPolygon([(0, 0), (2, 0), (2, 2), (1, 0.5), (0, 2)])  # reflex

    def test_surface_identity(self):
        # twice the second-highest intrinsic volume is the perimeter
        for t in ALL_2D + [Ball(1.2, dim=3), Box([1.0, 2.0, 3.0]), Ball(1.0, dim=4)]:
            v = t.intrinsic_volumes()
            assert 2.0 * v[t.dim - 1] == pytest.approx(t.perimeter, rel=1e-12)
            assert v[0] == pytest.approx(1.0)
            assert v[t.dim] == pytest.approx(t.volume)

    def test_bounding_box(self):
        lo, hi = Ellipse(2.0, 0.8).bounding_box()
        assert np.allclose(lo, [-2.0, -0.8]) and np.allclose(hi, [2.0, 0.8])
        lo, hi = Box([0.7, 1.3]).bounding_box()
        assert np.allclose(lo, 0.0) and np.allclose(hi, [0.7, 1.3])
        lo, hi = ConvexPolygon(HEX).bounding_box()
        assert np.allclose(lo, [-1.0, -math.sqrt(3) / 2])

    def test_padded_window_protocol(self):
        for t in (Ball(1.0), Box([1, 1]), Ellipse(2, 0.8), ConvexPolygon(HEX)):
            w = padded_window(t, 500.0)
            assert w.margin > 0
            lo, hi = t.bounding_box()
            assert np.all(w.lower < lo) and np.all(w.upper > hi)


class TestContains:
    def test_closed_boundary(self):
        assert Box([1.0, 1.0]).contains([1.0, 0.5])
        assert Ball(1.0).contains([1.0, 0.0])
        assert Ellipse(2.0, 0.8).contains([2.0, 0.0])
        # polygon with exactly representable constraints: vertices and
        # edge midpoints are members
        tri = ConvexPolygon([(0, 0), (1, 0), (0, 1)])
        assert tri.contains([0.0, 0.0])
        assert tri.contains([0.5, 0.0])
        assert tri.contains([1.0, 0.0])

    def test_interior_and_exterior(self):
        b = Ball(1.0)
        assert b.contains([0.1, -0.2])
        assert not b.contains([0.8, 0.8])
        assert not Box([1.0, 1.0]).contains([0.5, -0.01])
        assert not ConvexPolygon(HEX).contains([1.0, 1.0])

    def test_vectorized(self):
        hits = Ball(1.0).contains([[0, 0], [2, 0], [0.5, 0.5]])
        assert hits.tolist() == [True, False, True]
        assert isinstance(Ball(1.0).contains([0.0, 0.0]), bool)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            Ball(1.0, dim=3).contains([0.0, 0.0])

    def test_agreement_with_shapely(self):
        rng = np.random.default_rng(5)
        for t in ALL_2D:
            geom = shapely_of(t)
            lo, hi = t.bounding_box()
            pts = rng.uniform(lo - 0.3, hi + 0.3, size=(300, 2))
            ours = t.contains(pts)
            # skip points within shapely's discretization skin
            for p, hit in zip(pts, ours):
                gp = sg.Point(p)
                if geom.exterior.distance(gp) > 1e-3:
                    assert hit == geom.contains(gp)


class TestDistance:
    def test_ball(self):
        b = Ball(1.0)
        assert b.distance_to_boundary([0.0, 0.0]) == pytest.approx(-1.0)
        assert b.distance_to_boundary([2.0, 0.0]) == pytest.approx(1.0)
        assert b.distance_to_boundary([0.0, 1.0]) == pytest.approx(0.0, abs=1e-15)

    def test_box(self):
        b = Box([1.0, 1.0])
        assert b.distance_to_boundary([0.5, 0.2]) == pytest.approx(-0.2)
        assert b.distance_to_boundary([0.5, -0.3]) == pytest.approx(0.3)
        # outside past a corner: Euclidean corner distance
        assert b.distance_to_boundary([1.3, 1.4]) == pytest.approx(0.5)
        assert b.distance_to_boundary([1.0, 0.5]) == pytest.approx(0.0, abs=1e-15)

    def test_ellipse_frozen(self):
        # oracle: minimum over 4e6 dense boundary samples
        e = Ellipse(2.0, 0.8)
        cases = {
            (0.0, 0.0): -0.8,
            (3.0, 0.0): 1.0,
            (0.0, 1.5): 0.7,
            (1.0, 0.5): -0.18758849185330828,
            (0.3, 0.0): -0.7892129895391069,
            (2.5, 1.0): 0.9522488844040623,
            (0.0, 0.2): -0.6,
        }
        for p, want in cases.items():
            assert e.distance_to_boundary(p) == pytest.approx(want, abs=1e-7)

    def test_ellipse_symmetry_and_boundary(self):
        e = Ellipse(2.0, 0.8)
        for p in [(1.0, 0.5), (0.9, -0.1), (2.2, 0.3)]:
            d = e.distance_to_boundary(p)
            assert e.distance_to_boundary((-p[0], p[1])) == pytest.approx(d)
            assert e.distance_to_boundary((p[0], -p[1])) == pytest.approx(d)
        th = np.linspace(0.1, 6.0, 17)
        for x, y in zip(2.0 * np.cos(th), 0.8 * np.sin(th)):
            assert abs(e.distance_to_boundary((x, y))) < 1e-12

    def test_ellipse_fuzz_against_dense_boundary(self):
        e = Ellipse(2.0, 0.8)
        th = np.linspace(0, 2 * math.pi, 2_000_001)
        bx, by = 2.0 * np.cos(th), 0.8 * np.sin(th)
        rng = np.random.default_rng(8)
        pts = rng.uniform([-3, -2], [3, 2], size=(60, 2))
        for p in pts:
            brute = math.sqrt(((bx - p[0]) ** 2 + (by - p[1]) ** 2).min())
            got = abs(e.distance_to_boundary(p))
            # the sampled minimum overshoots by at most the chord sagitta
            assert got <= brute + 1e-12
            assert got >= brute - 1e-9

    def test_polygon(self):
        h = ConvexPolygon(HEX)
        assert h.distance_to_boundary([0.0, 0.0]) == pytest.approx(
            -math.sqrt(3) / 2, rel=1e-12
        )
        assert h.distance_to_boundary([2.0, 0.0]) == pytest.approx(1.0)
        assert abs(h.distance_to_boundary(HEX[1])) < 1e-15

    def test_polygon_fuzz_against_shapely(self):
        tri = ConvexPolygon([(0, 0), (1, 0), (0, 1)])
        ring = shapely_of(tri).exterior
        rng = np.random.default_rng(9)
        for p in rng.uniform(-0.5, 1.5, size=(200, 2)):
            want = ring.distance(sg.Point(p))
            got = tri.distance_to_boundary(p)
            assert abs(got) == pytest.approx(want, abs=1e-12)
            assert (got <= 0) == tri.contains(p)

    def test_sign_matches_contains(self):
        rng = np.random.default_rng(10)
        for t in ALL_2D:
            lo, hi = t.bounding_box()
            for p in rng.uniform(lo - 0.5, hi + 0.5, size=(100, 2)):
                d = t.distance_to_boundary(p)
                if abs(d) > 1e-9:
                    assert (d < 0) == bool(t.contains(p))

    def test_module_function(self):
        assert distance_to_boundary(Ball(1.0), [0.0, 0.0]) == pytest.approx(-1.0)


class TestCovariogram:
    def test_box_clipped_product(self):
        b = Box([1.0, 1.0])
        assert covariogram(b, [0.3, 0.0]) == pytest.approx(0.7, rel=1e-15)
        assert covariogram(b, [0.3, 0.4]) == pytest.approx(0.7 * 0.6, rel=1e-15)
        assert covariogram(b, [1.0, 0.0]) == 0.0

    def test_disk_lens_frozen(self):
        # oracle: g(h) = 2 acos(h/2) - (h/2) sqrt(4 - h^2), cross-checked
        # against shapely intersection areas to 7e-8
        d = Ball(1.0)
        assert covariogram(d, [0.5, 0.0]) == pytest.approx(
            2.152109225029709, rel=1e-12
        )
        assert covariogram(d, [0.0, 1.0]) == pytest.approx(
            1.228369698608757, rel=1e-12
        )
        big = Ball(2.0)
        assert covariogram(big, [1.2, 0.0]) == pytest.approx(
            7.839375298835324, rel=1e-12
        )

    def test_three_ball_lens_frozen(self):
        # oracle: two spherical caps, pi h^2 (3r - h)/3 each
        b = Ball(1.0, dim=3)
        assert covariogram(b, [0.8, 0.0, 0.0]) == pytest.approx(
            1.8095573684677209, rel=1e-12
        )

    def test_ellipse_frozen_and_shapely(self):
        e = Ellipse(2.0, 0.8)
        got = covariogram(e, [0.5, 0.3])
        assert got == pytest.approx(3.5966287356979323, rel=1e-12)
        ge = shapely_of(e)
        assert got == pytest.approx(
            ge.intersection(affinity.translate(ge, 0.5, 0.3)).area, abs=1e-6
        )

    def test_triangle_exact(self):
        t = ConvexPolygon([(0, 0), (1, 0), (0, 1)])
        assert covariogram(t, [0.2, 0.1]) == pytest.approx(0.245, abs=1e-14)

    def test_polygon_matches_shapely(self):
        h = ConvexPolygon(HEX)
        gh = shapely_of(h)
        rng = np.random.default_rng(3)
        for x in rng.uniform(-2.2, 2.2, size=(40, 2)):
            want = gh.intersection(affinity.translate(gh, x[0], x[1])).area
            assert covariogram(h, x) == pytest.approx(want, abs=1e-12)

    def test_value_at_zero_is_volume(self):
        for t in ALL_2D + [Ball(1.3, dim=3), Box([1, 2, 3])]:
            assert covariogram(t, np.zeros(t.dim)) == pytest.approx(
                t.volume, rel=1e-12
            )

    def test_vanishes_beyond_diameter(self):
        assert covariogram(Ball(1.0), [2.0, 0.0]) == 0.0
        assert covariogram(Ball(1.0), [2.5, 0.0]) == 0.0
        assert covariogram(ConvexPolygon(HEX), [2.1, 0.0]) == 0.0
        assert covariogram(Ellipse(2.0, 0.8), [0.0, 1.7]) == 0.0

    def test_even_in_x(self):
        rng = np.random.default_rng(17)
        for t in ALL_2D:
            lo, hi = t.bounding_box()
            span = hi - lo
            for x in rng.uniform(-span, span, size=(100, 2)):
                assert covariogram(t, x) == pytest.approx(
                    covariogram(t, -x), abs=1e-10
                )

    def test_lipschitz_bound(self):
        # |g(x) - g(y)| <= (Per/2) |x - y|
        rng = np.random.default_rng(23)
        for t in ALL_2D:
            lo, hi = t.bounding_box()
            span = hi - lo
            lam = t.perimeter / 2.0
            x = rng.uniform(-span, span, size=(1000, 2))
            y = x + rng.normal(scale=0.1, size=(1000, 2))
            for xi, yi in zip(x, y):
                gap = abs(covariogram(t, xi) - covariogram(t, yi))
                assert gap <= lam * np.linalg.norm(xi - yi) * (1 + 1e-9) + 1e-12

    def test_monte_carlo_route_agrees(self):
        for t in (Ball(1.0), Box([0.7, 1.3]), Ellipse(2.0, 0.8), ConvexPolygon(HEX)):
            mc = Covariogram(t, method="monte-carlo", samples=200_000, seed=7)
            x = np.full(2, 0.2)
            val, err = mc.evaluate(x)
            assert err > 0
            assert abs(val - covariogram(t, x)) < 4.0 * err

    def test_monte_carlo_deterministic(self):
        mc = Covariogram(Ball(1.0), method="monte-carlo", samples=50_000, seed=3)
        assert mc([0.4, 0.1]) == mc([0.4, 0.1])

    def test_analytic_wrapper(self):
        cov = Covariogram(Ball(1.0))
        val, err = cov.evaluate([0.5, 0.0])
        assert err == 0.0
        assert val == pytest.approx(2.152109225029709, rel=1e-12)

    def test_method_validation(self):
        with pytest.raises(ValueError):
            Covariogram(Ball(1.0), method="quadrature")


class TestPerimeterRecovery:
    def test_disk(self):
        got = perimeter_from_covariogram(Ball(1.0))
        assert abs(got - 2 * math.pi) / (2 * math.pi) < 0.01

    def test_unit_box(self):
        got = perimeter_from_covariogram(Box([1.0, 1.0]))
        assert abs(got - 4.0) / 4.0 < 0.01

    def test_ellipse(self):
        got = perimeter_from_covariogram(Ellipse(2.0, 0.8))
        assert abs(got - ELL_PER) / ELL_PER < 0.01

    def test_hexagon(self):
        got = perimeter_from_covariogram(ConvexPolygon(HEX))
        assert abs(got - 6.0) / 6.0 < 0.01

    def test_three_ball(self):
        got = perimeter_from_covariogram(Ball(1.0, dim=3))
        assert abs(got - 4 * math.pi) / (4 * math.pi) < 0.01

    def test_three_box(self):
        got = perimeter_from_covariogram(Box([1.0, 2.0, 3.0]))
        assert abs(got - 22.0) / 22.0 < 0.01

    def test_scaling_law(self):
        # doubling the body multiplies the perimeter by 2^(d-1)
        small = perimeter_from_covariogram(Ball(1.0))
        big = perimeter_from_covariogram(Ball(2.0))
        assert big / small == pytest.approx(2.0, rel=1e-3)
        small3 = perimeter_from_covariogram(Ball(1.0, dim=3))
        big3 = perimeter_from_covariogram(Ball(2.0, dim=3))
        assert big3 / small3 == pytest.approx(4.0, rel=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            perimeter_from_covariogram(Ball(1.0), radii=())


class TestSteiner:
    def test_disk(self):
        assert steiner_volume(Ball(1.0), 1.0) == pytest.approx(4 * math.pi, rel=1e-12)
        # parallel body of a ball is a bigger ball
        assert steiner_volume(Ball(1.0), 0.5) == pytest.approx(
            math.pi * 1.5**2, rel=1e-12
        )
        assert steiner_volume(Ball(1.0, dim=3), 0.5) == pytest.approx(
            4 / 3 * math.pi * 1.5**3, rel=1e-12
        )

    def test_unit_box(self):
        assert steiner_volume(Box([1.0, 1.0]), 1.0) == pytest.approx(
            1 + 4 + math.pi, rel=1e-12
        )
        assert steiner_volume(Box([0.7, 1.3]), 0.2) == pytest.approx(
            1.8356637061435916, rel=1e-12
        )

    def test_three_box_frozen(self):
        # oracle: faces + quarter edge cylinders + corner ball agree with
        # the intrinsic-volume expansion at 22.235987755982986
        assert steiner_volume(Box([1.0, 2.0, 3.0]), 0.5) == pytest.approx(
            22.235987755982986, rel=1e-12
        )

    def test_hexagon_and_ellipse_against_shapely(self):
        h = ConvexPolygon(HEX)
        assert steiner_volume(h, 0.5) == pytest.approx(
            shapely_of(h).buffer(0.5, quad_segs=4096).area, abs=1e-6
        )
        e = Ellipse(2.0, 0.8)
        assert steiner_volume(e, 0.3) == pytest.approx(
            shapely_of(e).buffer(0.3, quad_segs=4096).area, abs=1e-5
        )

    def test_zero_radius(self):
        for t in ALL_2D:
            assert steiner_volume(t, 0.0) == pytest.approx(t.volume, rel=1e-12)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            steiner_volume(Ball(1.0), -0.1)


class TestSampling:
    def test_inside_and_deterministic(self):
        for t in ALL_2D:
            pts = t.sample_uniform(500, seed=4)
            assert pts.shape == (500, 2)
            assert t.contains(pts).all()
            assert np.array_equal(pts, t.sample_uniform(500, seed=4))

    def test_seed_matters(self):
        a = Ball(1.0).sample_uniform(100, seed=1)
        b = Ball(1.0).sample_uniform(100, seed=2)
        assert not np.array_equal(a, b)

    def test_mean_near_centroid(self):
        pts = Ball(1.0).sample_uniform(40_000, seed=6)
        assert np.abs(pts.mean(axis=0)).max() < 0.02
        pts = Box([0.7, 1.3]).sample_uniform(40_000, seed=6)
        assert np.allclose(pts.mean(axis=0), [0.35, 0.65], atol=0.02)

    def test_three_dim(self):
        pts = Ball(1.0, dim=3).sample_uniform(200, seed=2)
        assert pts.shape == (200, 3)
        assert (np.linalg.norm(pts, axis=1) <= 1.0).all()
