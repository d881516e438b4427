import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfent.deviations import (
    CachedOracle,
    RegularKGon,
    VertexFree,
    bound_functional,
    box_bound,
    droplet_sets,
    interior_lattice_points,
    markov_blanket_deviation,
    markov_boundary_check,
    optimize_shape,
    polygon_bound,
)
from surfent.fields import IidModel, IsingModel
from surfent.geometry import Polygon, regular_polygon, square

HALF = Fraction(1, 2)
UNIT = square(1)


def isotropic(v):
    return 1.0


def axis_favouring(v):
    lam = min(abs(v[0]), abs(v[1])) / max(abs(v[0]), abs(v[1]))
    return 1.0 + 0.5 * lam


def brute_interior(poly, scale):
    """Exact point-in-polygon by crossing number over Fractions."""
    verts = [(Fraction(scale) * Fraction(x), Fraction(scale) * Fraction(y)) for x, y in poly.vertices]
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    out = set()
    for X in range(math.floor(min(xs)), math.ceil(max(xs)) + 1):
        for Y in range(math.floor(min(ys)), math.ceil(max(ys)) + 1):
            on_edge, inside = False, False
            for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
                cross = (x1 - x0) * (Y - y0) - (y1 - y0) * (X - x0)
                if cross == 0 and min(x0, x1) <= X <= max(x0, x1) and min(y0, y1) <= Y <= max(y0, y1):
                    on_edge = True
                if (y0 > Y) != (y1 > Y) and X < x0 + (Y - y0) * (x1 - x0) / (y1 - y0):
                    inside = not inside
            if inside and not on_edge:
                out.add((X, Y))
    return out


class TestInterior:
    @pytest.mark.parametrize(
        "poly,scale",
        [
            (UNIT, 4),
            (UNIT, 5),
            (Polygon(((Fraction(-1), Fraction(-1)), (Fraction(2), Fraction(-1)), (Fraction(0), Fraction(3)))), 3),
            (Polygon(((-0.5, -0.25), (0.75, -0.375), (0.25, 0.875))), 10),
            (Polygon(((-0.5, -0.25), (0.75, -0.375), (0.25, 0.875))), 8),
        ],
    )
    def test_matches_exact(self, poly, scale):
        got = {tuple(p) for p in interior_lattice_points(poly, scale).tolist()}
        assert got == brute_interior(poly, scale)

    def test_boundary_excluded(self):
        # the blown-up unit square [-2, 2]^2 keeps only its open interior
        pts = interior_lattice_points(UNIT, 4)
        assert len(pts) == 9 and np.abs(pts).max() == 1


class TestDroplets:
    def test_spec_example(self):
        d = droplet_sets(square(HALF * HALF * 4), Fraction(1, 4), 100)
        assert (d.k_n, d.l_n) == (100, 110)

    def test_alpha_one(self):
        d = droplet_sets(UNIT, 1, 10)
        assert len(d.C_sites) == 21 * 21 and len(d.D_sites) == 0
        assert d.c_fraction == 1

    def test_disjoint(self):
        d = droplet_sets(regular_polygon(6, 1.0), 0.3, 40)
        assert not (d.C_sites.as_set() & d.D_sites.as_set())
        assert d.k_n <= d.l_n

    def test_ladder(self):
        fracs = [droplet_sets(UNIT, Fraction(1, 4), n) for n in (50, 100, 200, 400)]
        dev = [abs(d.c_fraction - 0.25) for d in fracs]
        assert all(b < a for a, b in zip(dev, dev[1:]))
        assert dev[-1] <= 0.02
        # the outer annulus fills the rest up to the sqrt(n) gap
        gap = [abs(d.d_fraction - 0.75) for d in fracs]
        assert all(b < a for a, b in zip(gap, gap[1:]))

    def test_errors(self):
        with pytest.raises(ValueError):
            droplet_sets(square(1, center=(2, 2)), 0.5, 10)
        with pytest.raises(ValueError):
            droplet_sets(UNIT, 0, 10)
        with pytest.raises(ValueError):
            droplet_sets(UNIT, 1.5, 10)


class TestBound:
    @pytest.mark.parametrize("alpha", [Fraction(k, 10) for k in range(1, 11)])
    def test_square_is_box(self, alpha):
        s = 0.37
        b = bound_functional(square(alpha), [s] * 4)
        assert abs(b.gamma - box_bound(float(alpha), s)) <= 1e-12

    def test_box_examples(self):
        assert box_bound(1, 0.5) == 0.5
        assert box_bound(0.25, 1) == 0.5
        with pytest.raises(ValueError):
            box_bound(0, 1)
        with pytest.raises(ValueError):
            box_bound(0.5, -1)

    def test_octagon(self):
        side = math.sqrt(1 / (2 * (1 + math.sqrt(2))))
        closed = 4 * side / 4 + 4 * side / 4 / math.sqrt(2)
        b = bound_functional(regular_polygon(8, 1.0), [1.0] * 8)
        assert b.gamma == pytest.approx(closed, abs=1e-12)
        assert b.gamma == pytest.approx(0.77690, abs=5e-5)

    def test_zero_entropy(self):
        assert bound_functional(regular_polygon(5, 0.3), [0] * 5).gamma == 0

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            bound_functional(UNIT, [1.0] * 3)

    def test_parts_sum(self):
        b = bound_functional(regular_polygon(7, 0.5, 0.2), [0.1 * r for r in range(7)])
        assert abs(b.gamma - math.fsum(r["factor"] * r["length"] / 4 * r["h"] for r in b.rows())) <= 1e-12

    @given(st.integers(3, 40), st.floats(0, 2 * math.pi), st.floats(0.05, 1.0), st.floats(0.1, 5.0))
    def test_factor_bounds_and_scaling(self, k, rot, area, eta):
        poly = regular_polygon(k, area, rot)
        hs = [1.0 + 0.1 * r for r in range(k)]
        b = bound_functional(poly, hs)
        assert all(1 / math.sqrt(2) - 1e-12 <= e.factor <= 1 + 1e-12 for e in b.per_edge)
        assert bound_functional(poly.scaled(eta), hs).gamma == pytest.approx(eta * b.gamma, rel=1e-12)


def regular_kgon_closed_form(k):
    """Bound of a regular k-gon of area 1 at rotation 0 under h = 1, edge by edge."""
    r = math.sqrt(2 / (k * math.sin(2 * math.pi / k)))
    side = 2 * r * math.sin(math.pi / k)
    total = 0.0
    for j in range(k):
        theta = 2 * math.pi * j / k  # direction of edge j; the bottom edge is horizontal
        lam = min(abs(math.tan(theta)), abs(1 / math.tan(theta))) if math.sin(theta) and math.cos(theta) else 0.0
        total += side / 4 / math.sqrt(1 + lam * lam)
    return total


class TestOptimizer:
    @pytest.mark.parametrize("k", [4, 5, 8, 13, 64])
    def test_kgon_closed_form(self, k):
        assert polygon_bound(regular_polygon(k, 1.0), isotropic).gamma == pytest.approx(regular_kgon_closed_form(k), abs=1e-12)

    def test_kgon_family(self):
        g4 = polygon_bound(regular_polygon(4, 1.0), isotropic).gamma
        g64 = polygon_bound(regular_polygon(64, 1.0), isotropic).gamma
        assert g64 < g4 == pytest.approx(1.0)
        res = optimize_shape(1.0, isotropic, RegularKGon(tuple(range(4, 65))), budget=3000)
        assert res.bound.gamma < g64
        # a square turned by 45 degrees has only diagonal edges
        assert res.bound.gamma == pytest.approx(1 / math.sqrt(2), abs=1e-6)

    def test_zero_oracle(self):
        res = optimize_shape(0.5, lambda v: 0.0, VertexFree(6), budget=100)
        assert res.bound.gamma == 0 and res.converged and len(res.trace) == 1
        res = optimize_shape(0.5, lambda v: 0.0, RegularKGon((4, 5, 6)), budget=100)
        assert res.bound.gamma == 0 and res.converged

    def test_axis_favouring(self):
        start = regular_polygon(8, 1.0)
        res = optimize_shape(1.0, axis_favouring, VertexFree(8), budget=3000)
        sq = polygon_bound(square(1), axis_favouring).gamma
        assert res.bound.gamma < polygon_bound(start, axis_favouring).gamma < sq
        assert res.polygon.area == pytest.approx(1.0, rel=1e-9)

        def axis_fraction(poly):
            edges = poly.edges
            return sum(e.length for e in edges if e.slope.value == 0) / sum(e.length for e in edges)

        assert axis_fraction(res.polygon) > axis_fraction(start)

    def test_monotone_trace(self):
        res = optimize_shape(0.6, axis_favouring, VertexFree(10), budget=800, seed=3)
        accepted = [g for _, g, ok in res.trace if ok]
        assert all(b < a for a, b in zip(accepted, accepted[1:]))
        assert accepted[-1] == res.bound.gamma
        assert len(res.trace) <= 800

    def test_deterministic(self):
        a = optimize_shape(0.5, axis_favouring, VertexFree(6), budget=300, seed=9)
        b = optimize_shape(0.5, axis_favouring, VertexFree(6), budget=300, seed=9)
        assert a.trace == b.trace and a.polygon == b.polygon

    def test_cached_oracle(self):
        calls = []

        def f(v):
            calls.append(v)
            return 1.0

        c = CachedOracle(f, 1.0)
        c((1.0, 0.0))
        c((math.cos(1e-4), math.sin(1e-4)))
        assert len(calls) == 1
        c((0.0, 1.0))
        assert len(calls) == 2

    def test_errors(self):
        with pytest.raises(ValueError):
            optimize_shape(0, isotropic, VertexFree())
        with pytest.raises(TypeError):
            optimize_shape(0.5, isotropic, "square")


class TestMarkov:
    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 1.5), st.floats(-1, 1))
    def test_single_site_closed_form(self, beta, h):
        # one interior site whose right neighbour is left out of the boundary
        m = IsingModel(beta, h)
        dev, nb, ne = markov_blanket_deviation(m, [(0, 0)], [(-1, 0), (0, 1), (0, -1)])
        expected = max(math.tanh(beta * (s + 1) + h) - math.tanh(beta * (s - 1) + h) for s in (-3, -1, 1, 3))
        assert (nb, ne) == (3, 1)
        assert dev == pytest.approx(expected if beta > 0 else 0.0, abs=1e-12)

    def test_full_blanket(self):
        dev, _, ne = markov_blanket_deviation(IsingModel(0.8), [(0, 0), (1, 0)], [(-1, 0), (2, 0), (0, 1), (1, 1), (0, -1), (1, -1)])
        assert dev == 0 and ne == 0

    def test_infinite_temperature(self):
        assert markov_blanket_deviation(IsingModel(0.0), [(0, 0)], [])[0] == 0

    def test_seven_by_seven(self):
        poly = Polygon(((1, 1), (5, 1), (5, 5), (1, 5)))
        m = IsingModel(0.3)
        contour = markov_boundary_check(m, poly, (7, 7), "contour")
        lattice = markov_boundary_check(m, poly, (7, 7), "lattice")
        assert contour.deviation <= 1e-10
        assert lattice.deviation >= contour.deviation
        assert contour.interior == 9

    def test_sloped_edges(self):
        poly = Polygon(((3, 0.5), (5.5, 3), (3, 5.5), (0.5, 3)))
        report = markov_boundary_check(IsingModel(0.3), poly, (7, 7), "contour")
        assert report.deviation <= 1e-10 and report.interior > 0

    def test_errors(self):
        poly = Polygon(((1, 1), (5, 1), (5, 5), (1, 5)))
        with pytest.raises(TypeError):
            markov_boundary_check(IidModel((0.5, 0.5)), poly)
        with pytest.raises(ValueError):
            markov_boundary_check(IsingModel(0.3), poly, (16, 16))
        with pytest.raises(ValueError):
            markov_boundary_check(IsingModel(0.3), poly, boundary="wulff")
        with pytest.raises(ValueError):
            markov_blanket_deviation(IsingModel(0.3), [(x, 0) for x in range(17)], [])
