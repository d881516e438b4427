import math
from fractions import Fraction as F

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from surfent.geometry import (
    Axis,
    Curve,
    LinearMap,
    Polygon,
    SiteKind,
    SiteSet,
    Slope,
    blowup,
    contour_approx,
    direction_slope,
    equidistribution_check,
    frac,
    lattice_approx,
    lattice_length_factor,
    line_eval,
    parse_slope,
    polygon_contour_approx,
    polygon_lattice_approx,
    polygon_ratio_lattice_to_length,
    polygonization_deviation,
    polygonize,
    ratio_lattice_to_length,
    regular_polygon,
    skew_offset,
    square,
    torus_translate,
    torus_zero,
)


def floor_line(p, q, z, a_num, a_den):
    """floor(p z / q + a_num / a_den) in pure integers."""
    return (p * z * a_den + a_num * q) // (q * a_den)


rationals01 = st.tuples(st.integers(0, 50), st.integers(1, 50)).filter(lambda t: t[0] <= t[1]).map(lambda t: F(*t))
intercepts = st.tuples(st.integers(-500, 500), st.integers(1, 97)).map(lambda t: F(*t))


def rslope(f, axis=Axis.X):
    return Slope.rational(f.numerator, f.denominator, axis)


class TestSlope:
    def test_rejects_steep(self):
        with pytest.raises(ValueError):
            Slope.rational(3, 2)
        with pytest.raises(ValueError):
            Slope.irrational(1.5)

    def test_lowest_terms(self):
        with pytest.raises(ValueError):
            Slope(p=2, q=4)
        assert Slope.rational(2, 4) == Slope(p=1, q=2)

    def test_parse(self):
        assert parse_slope("1/2") == Slope.rational(1, 2)
        assert parse_slope("0") == Slope.rational(0, 1)
        assert not parse_slope("0.4142135623730951").is_rational
        assert parse_slope("1/3@y").axis is Axis.Y


def test_frac_negative():
    assert frac(F(-3, 10)) == F(7, 10)
    assert frac(-1e-20) == 0.0
    assert 0 <= frac(-0.3) < 1


class TestLineEval:
    def test_examples(self):
        assert line_eval(LinearMap(Slope.rational(1, 2), 0), 4) == 2
        assert line_eval(LinearMap(Slope.rational(0), 0.7), 123) == 0.7
        assert line_eval(LinearMap(Slope.irrational(0.3), 0.15), 3) == pytest.approx(1.05, abs=1e-15)

    def test_exact_rational(self):
        v = line_eval(LinearMap(Slope.rational(1, 3), F(1, 7)), 5)
        assert v == F(5, 3) + F(1, 7)


class TestLatticeApprox:
    def test_half(self):
        out = lattice_approx(LinearMap(Slope.rational(1, 2)), 0, 4)
        expected = [(z, floor_line(1, 2, z, 0, 1)) for z in range(5)]
        assert out.to_list() == expected == [(0, 0), (1, 0), (2, 1), (3, 1), (4, 2)]
        assert out.kind is SiteKind.LATTICE

    def test_horizontal(self):
        assert lattice_approx(LinearMap(Slope.rational(0)), 0, 3).to_list() == [(0, 0), (1, 0), (2, 0), (3, 0)]

    def test_negative_reflects(self):
        out = lattice_approx(LinearMap(Slope.rational(-1, 2)), 0, 2)
        pos = lattice_approx(LinearMap(Slope.rational(1, 2)), 0, 2)
        assert out.to_list() == [(-x, -y) for x, y in pos] == [(0, 0), (-1, 0), (-2, -1)]

    def test_negative_direct(self):
        out = lattice_approx(LinearMap(Slope.rational(-1, 2)), 0, 2, reflect_negative=False)
        assert out.to_list() == [(0, 0), (1, -1), (2, -1)]

    def test_y_axis_swaps(self):
        out = lattice_approx(LinearMap(Slope.rational(1, 2, Axis.Y)), 0, 4)
        assert out.to_list() == [(0, 0), (0, 1), (1, 2), (1, 3), (2, 4)]

    def test_rejects_reversed_range(self):
        with pytest.raises(ValueError):
            lattice_approx(LinearMap(Slope.rational(0)), 3, 2)

    @given(rationals01, intercepts, st.integers(-300, 300), st.integers(0, 300))
    def test_steps(self, lam, a, z0, length):
        out = lattice_approx(LinearMap(rslope(lam), a), z0, z0 + length)
        assert len(out) == length + 1
        pts = out.to_list()
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            assert x1 - x0 == 1 and y1 - y0 in (0, 1)

    def test_step_frequency(self):
        lam = F(3, 7)
        n = 7000
        pts = lattice_approx(LinearMap(rslope(lam), F(1, 5)), 0, n).to_list()
        ups = sum(b[1] - a[1] for a, b in zip(pts, pts[1:]))
        assert abs(ups / n - float(lam)) <= 1 / n


class TestTorus:
    def test_translate_examples(self):
        assert torus_translate(Slope.irrational(0.3), 0.9, 1) == pytest.approx(0.2, abs=1e-12)
        assert torus_translate(Slope.rational(1, 2), 0, 2) == 0
        assert torus_translate(Slope.irrational(0.123), 0.77, 0) == 0.77

    def test_zero_examples(self):
        assert torus_zero(Slope.rational(0), 5) == 0
        # {-(-1)(0.3)} = 0.3 and 1 - {0.6} = 0.4
        assert torus_zero(Slope.rational(3, 10), -1) == F(3, 10)
        assert torus_zero(Slope.rational(3, 10), 2) == F(2, 5)
        assert torus_zero(Slope.irrational(0.3), -1) == pytest.approx(0.3, abs=1e-12)
        assert torus_zero(Slope.irrational(0.3), 2) == pytest.approx(0.4, abs=1e-12)

    @given(st.tuples(st.integers(-50, 50), st.integers(1, 50)).filter(lambda t: abs(t[0]) <= t[1]), st.integers(-1000, 1000))
    def test_zero_rational(self, pq, nu):
        s = Slope.rational(*pq)
        a = torus_zero(s, nu)
        assert 0 <= a < 1
        assert torus_translate(s, a, nu) == 0

    @given(st.floats(-1, 1).filter(lambda x: x != 0), st.integers(-1000, 1000))
    def test_zero_irrational(self, lam, nu):
        s = Slope.irrational(lam)
        t = torus_translate(s, torus_zero(s, nu), nu)
        assert min(t, 1 - t) <= 1e-12


class TestSkewOffset:
    def test_examples(self):
        assert skew_offset(LinearMap(Slope.rational(1, 2), 0), 5) == (5, 2)
        assert skew_offset(LinearMap(Slope.irrational(0.77), 0.31), 0) == (0, 0)
        assert skew_offset(LinearMap(Slope.irrational(0.3), 0.15), 3) == (3, 1)

    @given(rationals01, st.tuples(st.integers(0, 96), st.integers(1, 97)).filter(lambda t: t[0] < t[1]), st.integers(0, 1000), st.integers(0, 1000))
    def test_cocycle(self, lam, a, m, n):
        s = rslope(lam)
        a = F(*a)
        lhs = skew_offset(LinearMap(s, a), m + n)
        k1 = skew_offset(LinearMap(s, a), m)
        k2 = skew_offset(LinearMap(s, torus_translate(s, a, m)), n)
        assert lhs == (k1[0] + k2[0], k1[1] + k2[1])

    @given(rationals01, intercepts, st.integers(-1000, 1000), st.integers(-50, 50), st.integers(0, 50))
    def test_shift_identity(self, lam, a, z, lo, length):
        s = rslope(lam)
        base = lattice_approx(LinearMap(s, a), z + lo, z + lo + length).to_list()
        anchor = lattice_approx(LinearMap(s, a), z, z)[0]
        moved = lattice_approx(LinearMap(s, torus_translate(s, frac(a), z)), lo, lo + length).to_list()
        assert base == [(x + anchor[0], y + anchor[1]) for x, y in moved]


class TestContour:
    def test_half(self):
        out = contour_approx(LinearMap(Slope.rational(1, 2)), 0, 4)
        assert out.to_list() == [(0, 0), (1, 0), (2, 0), (2, 1), (3, 1), (4, 1), (4, 2)]
        assert out.kind is SiteKind.CONTOUR

    def test_horizontal(self):
        m = LinearMap(Slope.rational(0))
        assert contour_approx(m, 0, 3).to_list() == lattice_approx(m, 0, 3).to_list()

    def test_ratio_tends_to_three_halves(self):
        m = LinearMap(Slope.rational(1, 2))
        N = 5000
        r = len(contour_approx(m, 0, 2 * N)) / len(lattice_approx(m, 0, 2 * N))
        assert abs(r - 1.5) < 1e-3

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            contour_approx(LinearMap(Slope.rational(-1, 2)), 0, 3)

    @given(rationals01, intercepts, st.integers(-100, 100), st.integers(0, 100))
    def test_connected_and_matches_torus_rule(self, lam, a, z0, length):
        s = rslope(lam)
        m = LinearMap(s, a)
        pts = contour_approx(m, z0, z0 + length).to_list()
        for p0, p1 in zip(pts, pts[1:]):
            assert abs(p1[0] - p0[0]) + abs(p1[1] - p0[1]) == 1
        # fill sites appear exactly where the torus orbit crosses 1 - lam
        lat = lattice_approx(m, z0, z0 + length).to_list()
        fills = [
            (lat[i + 1][0], lat[i + 1][1] - 1)
            for i in range(length)
            if torus_translate(s, frac(a), z0 + i) >= 1 - lam
        ]
        assert sorted(pts) == sorted(lat + fills)


class TestPolygon:
    def test_rejects_clockwise(self):
        with pytest.raises(ValueError):
            Polygon(((0, 0), (0, 1), (1, 1), (1, 0)))
        assert Polygon.oriented(((0, 0), (0, 1), (1, 1), (1, 0))).area == 1

    def test_rejects_self_intersection(self):
        with pytest.raises(ValueError):
            Polygon(((0, 0), (1, 1), (1, 0), (0, 1)))

    def test_rejects_backtracking(self):
        with pytest.raises(ValueError):
            Polygon(((0, 0), (2, 0), (1, 0)), closed=False)

    def test_edges(self):
        e = Polygon(((0, 0), (4, 0), (0, 4))).edges
        assert [ed.slope for ed in e] == [Slope.rational(0), Slope.rational(-1), Slope.rational(0, 1, Axis.Y)]
        assert e[1].intercept == 4

    def test_unit_square_blowup_three(self):
        out = polygon_lattice_approx(Polygon(((0, 0), (1, 0), (1, 1), (0, 1))), 3)
        boundary = {(x, y) for x in range(4) for y in range(4) if x in (0, 3) or y in (0, 3)}
        assert len(out) == 12 and out.as_set() == boundary
        assert out[0] == (0, 0)

    def test_n_one_equals_edge_union(self):
        tri = Polygon(((0, 0), (4, 0), (0, 4)))
        out = polygon_lattice_approx(tri, 1)
        expected = {(z, 0) for z in range(5)} | {(z, 4 - z) for z in range(5)} | {(0, z) for z in range(5)}
        assert out.as_set() == expected
        hyp = [(x, y) for x, y in out if x + y == 4]
        assert hyp == [(4, 0), (3, 1), (2, 2), (1, 3), (0, 4)]

    @pytest.mark.parametrize("n", [3, 10, 40])
    def test_blowup_scaling(self, n):
        poly = regular_polygon(7, 2.0)
        a, b = len(polygon_lattice_approx(poly, n)), len(polygon_lattice_approx(poly, 3 * n))
        assert abs(b - 3 * a) / (3 * a) <= 2 * len(poly.edges) / n

    def test_contour_chain_is_four_connected(self):
        poly = regular_polygon(9, 3.0, rotation=0.1)
        sites = polygon_contour_approx(poly, 6).as_set()
        lat = polygon_lattice_approx(poly, 6).as_set()
        assert lat <= sites
        start = next(iter(sites))
        seen, stack = {start}, [start]
        while stack:
            x, y = stack.pop()
            for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if nb in sites and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        assert seen == sites

    def test_square_helper_exact(self):
        sq = square(F(1, 4))
        assert sq.vertices[0] == (F(-1, 4), F(-1, 4))
        assert sq.area == 0.25

    def test_contains(self):
        sq = square(1)
        assert sq.contains((0, 0))
        assert not sq.contains((F(1, 2), 0))
        assert not sq.contains((1, 0))


class TestDirectionSlope:
    def test_examples(self):
        assert direction_slope((1, 0)) == (Axis.X, 0)
        assert direction_slope((0, 1)) == (Axis.Y, 0)
        axis, lam = direction_slope((math.cos(math.pi / 3), math.sin(math.pi / 3)))
        assert axis is Axis.Y and abs(lam) == pytest.approx(1 / math.sqrt(3), abs=1e-12)

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            direction_slope((1, 1))

    @given(st.floats(0, 2 * math.pi))
    def test_antipodal(self, phi):
        v = (math.cos(phi), math.sin(phi))
        a1, l1 = direction_slope(v)
        a2, l2 = direction_slope((-v[0], -v[1]))
        assert abs(l1) <= 1
        assert a1 is a2 and abs(l1) == pytest.approx(abs(l2), abs=1e-15)
        assert abs(l1) == pytest.approx(min(abs(math.tan(phi)), abs(1 / math.tan(phi))) if math.tan(phi) else 0, abs=1e-9)


class TestCurves:
    def test_blowup_segment(self):
        c = blowup(Curve.segment((0, 0), (1, 0)), 2)
        assert c.T == 2 and c.samples[-1].p == (2.0, 0.0)

    def test_blowup_identity(self):
        c = Curve.circle(1.3, (2, 0), 64)
        assert blowup(c, 1) == c

    def test_blowup_area(self):
        c = Curve.circle(1.0, (0.5, 0.2), 256)
        assert polygonize(blowup(c, 3), 64).area == pytest.approx(9 * polygonize(c, 64).area, rel=1e-12)

    def test_rejects_non_arc_length(self):
        with pytest.raises(ValueError):
            Curve(((0.0, (0, 0), (1, 0)), (1.0, (2, 0), (2, 0))))

    def test_origin_check(self):
        with pytest.raises(ValueError):
            Curve(Curve.segment((-1, 0), (1, 0), 2).samples, exclude_origin=True)

    def test_segment_polygonize(self):
        c = Curve.segment((0, 0), (3, 4), 10)
        poly = polygonize(c, 5)
        assert not poly.closed
        assert polygonization_deviation(c, 5) < 1e-12

    def test_circle_deviation_decreases(self):
        c = Curve.circle(1.0, (0, 0), 512)
        assert polygonization_deviation(c, 64) < polygonization_deviation(c, 4)

    def test_square_fixed_point(self):
        c = Curve.from_polygon(Polygon(((0, 0), (1, 0), (1, 1), (0, 1))), 4)
        poly = polygonize(c, 4)
        assert poly.vertices == ((0, 0), (1, 0), (1, 1), (0, 1))
        assert polygonization_deviation(c, 4) == 0

    def test_degenerate_chord(self):
        c = Curve.circle(1.0, (3, 0), 64)
        with pytest.raises(ValueError):
            polygonize(c, 1)


class TestEquidistribution:
    def test_weyl(self):
        v = equidistribution_check(Slope.irrational(math.sqrt(2) - 1), 0.0, (0, 0.5), 10**6)
        assert abs(v - 0.5) <= 2e-3

    def test_periodic_orbit(self):
        # orbit {0, 1/2}: only 0 lies in [0, 1/2)
        assert equidistribution_check(Slope.rational(1, 2), 0, (0, F(1, 2)), 9999) == 0.5

    @given(st.floats(-1, 1), st.floats(0, 0.999), st.integers(1, 500))
    def test_full_torus(self, lam, t0, n):
        assert equidistribution_check(Slope.irrational(lam), t0, (0, 1), n) == 1.0


class TestLengthRatio:
    def test_horizontal(self):
        for k in (1, 7, 100):
            assert abs(ratio_lattice_to_length(0, k) - 1) <= 1 / k + 1e-12

    @pytest.mark.parametrize("lam,expected", [(F(1, 2), 2 / math.sqrt(5)), (1, 1 / math.sqrt(2))])
    def test_limits(self, lam, expected):
        assert ratio_lattice_to_length(lam, 10**4) == pytest.approx(expected, abs=1e-3)

    def test_polygon_factor(self):
        tri = Polygon(((0, 0), (1, 0), (0, 1)))
        expected = (2 + math.sqrt(2) / math.sqrt(2)) / (2 + math.sqrt(2))
        assert lattice_length_factor(tri) == pytest.approx(expected, abs=1e-12)
        assert polygon_ratio_lattice_to_length(tri, 2000) == pytest.approx(expected, abs=1e-3)


def test_siteset_rejects_duplicates():
    with pytest.raises(ValueError):
        SiteSet([(0, 0), (0, 0)])
    s = SiteSet([(1, 2), (3, 4)])
    assert s.to_list() == [(1, 2), (3, 4)] and s == SiteSet([(1, 2), (3, 4)])
    with pytest.raises(ValueError):
        s.sites[0, 0] = 5


@settings(max_examples=50)
@given(st.floats(0.01, 0.99), st.floats(0, 0.999), st.integers(0, 300), st.integers(0, 300))
def test_cocycle_irrational(lam, a, m, n):
    s = Slope.irrational(lam)
    # skip draws within rounding distance of a floor boundary
    vals = [lam * (m + n) + a, lam * m + a, torus_translate(s, a, m) + lam * n]
    assume(all(min(frac(v), 1 - frac(v)) > 1e-9 for v in vals))
    lhs = skew_offset(LinearMap(s, a), m + n)
    k1 = skew_offset(LinearMap(s, a), m)
    k2 = skew_offset(LinearMap(s, torus_translate(s, a, m)), n)
    assert lhs == (k1[0] + k2[0], k1[1] + k2[1])
