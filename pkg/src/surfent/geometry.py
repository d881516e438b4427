"""Integer and torus geometry of lines, polygons and curves in the plane.

Rational slopes are carried as :class:`fractions.Fraction` so every lattice
computation on them is exact.  Slopes flagged irrational are plain floats and
are reduced modulo one after every torus step.

A line ``l(x) = lam * x + a`` with ``|lam| <= 1`` is digitized as the sites
``(z, floor(l(z)))``.  Steeper lines are expressed as functions of ``y``
instead, which is recorded by the :class:`Axis` of their :class:`Slope`.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Rational, Real
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Axis",
    "Slope",
    "LinearMap",
    "SiteKind",
    "SiteSet",
    "Edge",
    "Polygon",
    "CurveSample",
    "Curve",
    "frac",
    "line_eval",
    "lattice_approx",
    "torus_translate",
    "torus_zero",
    "skew_offset",
    "contour_approx",
    "blowup",
    "polygon_lattice_approx",
    "polygon_contour_approx",
    "direction_slope",
    "polygonize",
    "polygonization_deviation",
    "equidistribution_check",
    "ratio_lattice_to_length",
    "polygon_ratio_lattice_to_length",
    "lattice_length_factor",
    "square",
    "regular_polygon",
    "parse_slope",
]

SNAP_DENOMINATOR = 64
SNAP_TOLERANCE = 1e-12
UNIT_TOLERANCE = 1e-9


def _exact(x):
    """Keep ints and Fractions exact, turn everything else into a float."""
    if isinstance(x, bool):
        raise TypeError("booleans are not coordinates")
    if isinstance(x, Integral):
        return int(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, Real):
        return float(x)
    raise TypeError(f"not a real number: {x!r}")


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction))


def frac(x):
    """Fractional part ``x - floor(x)``, always in ``[0, 1)``.

    >>> frac(Fraction(-3, 10))
    Fraction(7, 10)
    """
    x = _exact(x)
    r = x - math.floor(x)
    if not _is_exact(r) and r >= 1.0:
        # -1e-20 - floor(-1e-20) rounds to exactly 1.0
        r = 0.0
    return r


class Axis(str, enum.Enum):
    X = "x"
    Y = "y"


@dataclass(frozen=True)
class Slope:
    """A slope in ``[-1, 1]`` together with the axis it is measured along.

    Use :meth:`rational` or :meth:`irrational` rather than the raw fields.
    """

    p: int | None = None
    q: int | None = None
    real: float | None = None
    axis: Axis = Axis.X

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        if self.q is not None:
            if self.real is not None or self.p is None:
                raise ValueError("a slope is either rational or irrational")
            if self.q <= 0:
                raise ValueError("denominator must be positive")
            if math.gcd(abs(self.p), self.q) != 1:
                raise ValueError(f"{self.p}/{self.q} is not in lowest terms")
            if abs(self.p) > self.q:
                raise ValueError(f"|{self.p}/{self.q}| > 1; normalize with direction_slope")
        else:
            if self.real is None or self.p is not None:
                raise ValueError("a slope is either rational or irrational")
            if not math.isfinite(self.real) or abs(self.real) > 1:
                raise ValueError(f"|{self.real}| > 1; normalize with direction_slope")

    @classmethod
    def rational(cls, p, q=1, axis=Axis.X) -> "Slope":
        f = Fraction(p, q)
        return cls(p=f.numerator, q=f.denominator, axis=axis)

    @classmethod
    def irrational(cls, value, axis=Axis.X) -> "Slope":
        return cls(real=float(value), axis=axis)

    @property
    def is_rational(self) -> bool:
        return self.q is not None

    @property
    def value(self):
        return Fraction(self.p, self.q) if self.is_rational else self.real

    def __float__(self):
        return float(self.value)

    def __abs__(self) -> "Slope":
        if self.is_rational:
            return Slope(p=abs(self.p), q=self.q, axis=self.axis)
        return Slope(real=abs(self.real), axis=self.axis)

    def __str__(self):
        v = f"{self.p}/{self.q}" if self.is_rational else repr(self.real)
        return v if self.axis is Axis.X else f"{v}@y"


def parse_slope(text: str, axis=Axis.X) -> Slope:
    """Parse ``"p/q"`` or an integer as rational, anything else as irrational.

    An optional ``@y`` suffix selects the vertical axis.
    """
    text = text.strip()
    if text.endswith("@y"):
        text, axis = text[:-2], Axis.Y
    elif text.endswith("@x"):
        text = text[:-2]
    if "/" in text:
        p, q = text.split("/")
        return Slope.rational(int(p), int(q), axis)
    try:
        return Slope.rational(int(text), 1, axis)
    except ValueError:
        return Slope.irrational(float(text), axis)


@dataclass(frozen=True)
class LinearMap:
    """The line ``x -> slope * x + intercept`` along ``slope.axis``."""

    slope: Slope
    intercept: float | Fraction | int = 0

    def __post_init__(self):
        object.__setattr__(self, "intercept", _exact(self.intercept))

    def __call__(self, x):
        return line_eval(self, x)

    def with_intercept(self, a) -> "LinearMap":
        return LinearMap(self.slope, a)


def line_eval(m: LinearMap, x):
    """Evaluate ``lam * x + a``; exact when slope, intercept and ``x`` are."""
    x = _exact(x)
    lam = m.slope.value
    if _is_exact(lam) and _is_exact(x) and _is_exact(m.intercept):
        return lam * x + m.intercept
    return float(lam) * float(x) + float(m.intercept)


def _floor_line(m: LinearMap, z) -> int:
    return math.floor(line_eval(m, z))


class SiteKind(str, enum.Enum):
    LATTICE = "lattice"
    CONTOUR = "contour"


class SiteSet:
    """An ordered list of distinct integer sites.

    Backed by a read-only ``(N, 2)`` int64 array; iteration yields plain
    ``(x, y)`` tuples of Python ints.
    """

    __slots__ = ("_sites", "kind")

    def __init__(self, sites, kind=SiteKind.LATTICE, *, check=True):
        arr = np.asarray(sites, dtype=np.int64)
        if arr.size == 0:
            arr = np.zeros((0, 2), dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("sites must be an (N, 2) array of integers")
        if check and len(np.unique(arr, axis=0)) != len(arr):
            raise ValueError("duplicate sites")
        arr = arr.copy()
        arr.flags.writeable = False
        self._sites = arr
        self.kind = SiteKind(kind)

    @property
    def sites(self) -> np.ndarray:
        return self._sites

    def __len__(self):
        return len(self._sites)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        for x, y in self._sites.tolist():
            yield (x, y)

    def __getitem__(self, i):
        x, y = self._sites[i].tolist()
        return (x, y)

    def __eq__(self, other):
        if not isinstance(other, SiteSet):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self._sites, other._sites)

    def __hash__(self):
        return hash((self.kind, self._sites.tobytes()))

    def __repr__(self):
        head = ", ".join(map(str, list(self)[:6]))
        more = ", ..." if len(self) > 6 else ""
        return f"SiteSet([{head}{more}], kind={self.kind.value})"

    def to_list(self) -> list[tuple[int, int]]:
        return list(self)

    def as_set(self) -> set[tuple[int, int]]:
        return set(self)

    def swapped(self) -> "SiteSet":
        return SiteSet(self._sites[:, ::-1], self.kind, check=False)


def _dedupe(sites: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    seen, out = set(), []
    for s in sites:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def lattice_approx(m: LinearMap, z_lo: int, z_hi: int, *, reflect_negative: bool = True) -> SiteSet:
    """Sites ``(z, floor(l(z)))`` for ``z_lo <= z <= z_hi``.

    For a negative slope the default is the point reflection
    ``L_{lam,a}(I) = -L_{-lam,a}(I)``; pass ``reflect_negative=False`` for the
    direct digitization ``(z, floor(lam z + a))`` instead.  A vertical-axis
    slope swaps the coordinates of every site.
    """
    if z_lo > z_hi:
        raise ValueError("z_lo must not exceed z_hi")
    lam = m.slope.value
    if lam < 0 and reflect_negative:
        pos = LinearMap(abs(m.slope), m.intercept)
        sites = [(-z, -_floor_line(pos, z)) for z in range(z_lo, z_hi + 1)]
    else:
        sites = [(z, _floor_line(m, z)) for z in range(z_lo, z_hi + 1)]
    out = SiteSet(sites, SiteKind.LATTICE, check=False)
    return out.swapped() if m.slope.axis is Axis.Y else out


def torus_translate(slope: Slope, t, n: int):
    """``{t + n * lam}``, exact for rational slopes."""
    t = _exact(t)
    lam = slope.value
    if _is_exact(t) and _is_exact(lam):
        return frac(t + n * lam)
    return frac(frac(float(t)) + frac(n * float(lam)))


def torus_zero(slope: Slope, nu: int):
    """The unique ``a`` in ``[0, 1)`` with ``torus_translate(slope, a, nu) == 0``."""
    lam = slope.value
    if nu == 0 or lam == 0:
        return Fraction(0) if _is_exact(lam) else 0.0
    x = nu * lam
    if (nu > 0) == (lam > 0):
        return frac(1 - frac(x))
    return frac(-frac(x))


def skew_offset(m: LinearMap, n: int) -> tuple[int, int]:
    """Offset ``(n, floor(l(n)))`` of the n-th iterate of the skew product."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    lam = m.slope.value
    if not 0 <= lam <= 1:
        raise ValueError("skew offsets need a slope in [0, 1]")
    site = (n, _floor_line(m, n))
    return site[::-1] if m.slope.axis is Axis.Y else site


def contour_approx(m: LinearMap, z_lo: int, z_hi: int) -> SiteSet:
    """Lattice approximation with every diagonal step filled in.

    Whenever the line climbs between ``z`` and ``z + 1`` the site
    ``(z + 1, floor(l(z)))`` is inserted, which turns the 8-connected lattice
    approximation into a 4-connected chain.
    """
    lam = m.slope.value
    if not 0 <= lam <= 1:
        raise ValueError("contour approximations need a slope in [0, 1]")
    if z_lo > z_hi:
        raise ValueError("z_lo must not exceed z_hi")
    ys = [_floor_line(m, z) for z in range(z_lo, z_hi + 1)]
    sites = [(z_lo, ys[0])]
    for i in range(1, len(ys)):
        z = z_lo + i
        if ys[i] != ys[i - 1]:
            sites.append((z, ys[i - 1]))
        sites.append((z, ys[i]))
    out = SiteSet(sites, SiteKind.CONTOUR, check=False)
    return out.swapped() if m.slope.axis is Axis.Y else out


def direction_slope(v) -> tuple[Axis, float]:
    """Axis and slope in ``[-1, 1]`` for the direction of a unit vector."""
    vx, vy = (float(c) for c in v)
    if abs(math.hypot(vx, vy) - 1) > UNIT_TOLERANCE:
        raise ValueError(f"not a unit vector: {v!r}")
    if abs(vy) <= abs(vx):
        return Axis.X, vy / vx
    return Axis.Y, vx / vy


def _slope_from_delta(dx, dy) -> tuple[Axis, object]:
    """Axis and (possibly exact) slope of the segment with increments dx, dy."""
    if abs(dy) <= abs(dx):
        axis, num, den = Axis.X, dy, dx
    else:
        axis, num, den = Axis.Y, dx, dy
    if _is_exact(num) and _is_exact(den):
        return axis, Fraction(num) / Fraction(den)
    return axis, float(num) / float(den)


def _make_slope(axis: Axis, lam) -> Slope:
    if _is_exact(lam):
        return Slope.rational(lam.numerator, lam.denominator, axis)
    snap = Fraction(lam).limit_denominator(SNAP_DENOMINATOR)
    if abs(float(snap) - lam) <= SNAP_TOLERANCE:
        return Slope.rational(snap.numerator, snap.denominator, axis)
    return Slope.irrational(max(-1.0, min(1.0, lam)), axis)


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _on_segment(a, b, c) -> bool:
    return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])


def _segments_meet(p1, p2, p3, p4) -> bool:
    d1, d2 = _sign(_orient(p3, p4, p1)), _sign(_orient(p3, p4, p2))
    d3, d4 = _sign(_orient(p1, p2, p3)), _sign(_orient(p1, p2, p4))
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return (
        (d1 == 0 and _on_segment(p3, p4, p1))
        or (d2 == 0 and _on_segment(p3, p4, p2))
        or (d3 == 0 and _on_segment(p1, p2, p3))
        or (d4 == 0 and _on_segment(p1, p2, p4))
    )


@dataclass(frozen=True)
class Edge:
    start: tuple
    end: tuple
    slope: Slope
    intercept: object
    interval: tuple
    length: float

    @property
    def line(self) -> LinearMap:
        return LinearMap(self.slope, self.intercept)

    @property
    def direction(self) -> tuple[float, float]:
        dx, dy = float(self.end[0] - self.start[0]), float(self.end[1] - self.start[1])
        return dx / self.length, dy / self.length


@dataclass(frozen=True)
class Polygon:
    """A simple polygonal path, closed (counter-clockwise) or open."""

    vertices: tuple
    closed: bool = True

    def __post_init__(self):
        verts = tuple((_exact(x), _exact(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        need = 3 if self.closed else 2
        if len(verts) < need:
            raise ValueError(f"need at least {need} vertices")
        segs = self._segments()
        for a, b in segs:
            if a == b:
                raise ValueError("zero-length edge")
        n = len(segs)
        for i in range(n):
            for j in range(i + 1, n):
                adjacent = j == i + 1 or (self.closed and i == 0 and j == n - 1)
                (a, b), (c, d) = segs[i], segs[j]
                if adjacent:
                    # adjacent edges may only touch at the shared vertex
                    other_i, other_j = (a, d) if j == i + 1 else (b, c)
                    if _orient(a, b, other_j) == 0 and _on_segment(a, b, other_j):
                        raise ValueError("polygon edges overlap")
                    if _orient(c, d, other_i) == 0 and _on_segment(c, d, other_i):
                        raise ValueError("polygon edges overlap")
                elif _segments_meet(a, b, c, d):
                    raise ValueError("polygon is not simple")
        if self.closed:
            area = self.signed_area
            if area <= 0:
                raise ValueError("closed polygons must be positively oriented with positive area")

    def _segments(self):
        v = self.vertices
        segs = list(zip(v[:-1], v[1:]))
        if self.closed:
            segs.append((v[-1], v[0]))
        return segs

    @classmethod
    def oriented(cls, vertices, closed=True) -> "Polygon":
        """Build a closed polygon, reversing clockwise vertex lists."""
        verts = [(_exact(x), _exact(y)) for x, y in vertices]
        if closed and _shoelace(verts) < 0:
            verts.reverse()
        return cls(tuple(verts), closed)

    @property
    def signed_area(self):
        return _shoelace(self.vertices) if self.closed else 0

    @property
    def area(self) -> float:
        return float(abs(self.signed_area))

    @property
    def edges(self) -> list[Edge]:
        out = []
        for a, b in self._segments():
            dx, dy = b[0] - a[0], b[1] - a[1]
            axis, lam = _slope_from_delta(dx, dy)
            if axis is Axis.X:
                intercept = a[1] - lam * a[0]
                interval = (a[0], b[0])
            else:
                intercept = a[0] - lam * a[1]
                interval = (a[1], b[1])
            out.append(Edge(a, b, _make_slope(axis, lam), intercept, interval, math.hypot(float(dx), float(dy))))
        return out

    @property
    def length(self) -> float:
        return math.fsum(e.length for e in self.edges)

    def scaled(self, eta) -> "Polygon":
        eta = _exact(eta)
        return Polygon(tuple((eta * x, eta * y) for x, y in self.vertices), self.closed)

    def contains(self, point) -> bool:
        """Strict interior test (boundary points are outside), exact for exact input."""
        if not self.closed:
            return False
        px, py = (_exact(c) for c in point)
        exact_verts = [(Fraction(x), Fraction(y)) for x, y in self.vertices]
        pt = (Fraction(px), Fraction(py))
        inside = False
        n = len(exact_verts)
        for i in range(n):
            a, b = exact_verts[i], exact_verts[(i + 1) % n]
            if _orient(a, b, pt) == 0 and _on_segment(a, b, pt):
                return False
            if (a[1] > pt[1]) != (b[1] > pt[1]):
                xc = a[0] + (pt[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                if pt[0] < xc:
                    inside = not inside
        return inside


def _shoelace(verts):
    n = len(verts)
    s = sum(verts[i][0] * verts[(i + 1) % n][1] - verts[(i + 1) % n][0] * verts[i][1] for i in range(n))
    return s / 2 if _is_exact(s) else 0.5 * s


def square(area=1, center=(0, 0)) -> Polygon:
    """Axis-aligned square of the given area, counter-clockwise from the lower left."""
    area = _exact(area)
    side = math.sqrt(area)
    if _is_exact(area):
        f = Fraction(area)
        root = Fraction(math.isqrt(f.numerator), math.isqrt(f.denominator))
        if root * root == f:
            side = root
    h = side / 2
    cx, cy = (_exact(c) for c in center)
    return Polygon(((cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)))


def regular_polygon(k: int, area: float = 1.0, rotation: float = 0.0, center=(0.0, 0.0)) -> Polygon:
    """Regular k-gon of the given area.

    With ``rotation=0`` the bottom edge is horizontal.
    """
    if k < 3:
        raise ValueError("k >= 3")
    r = math.sqrt(2 * area / (k * math.sin(2 * math.pi / k)))
    phi0 = -math.pi / 2 - math.pi / k + rotation
    cx, cy = center
    verts = tuple(
        (cx + r * math.cos(phi0 + 2 * math.pi * j / k), cy + r * math.sin(phi0 + 2 * math.pi * j / k)) for j in range(k)
    )
    return Polygon(verts)


def _edge_sites(edge: Edge, scale) -> list[tuple[int, int]]:
    """Direct floor digitization of one blown-up edge, in traversal order."""
    a, b = edge.interval
    a, b = scale * a, scale * b
    m = LinearMap(edge.slope, scale * edge.intercept)
    if b >= a:
        zs = range(math.ceil(a), math.floor(b) + 1)
    else:
        zs = range(math.floor(a), math.ceil(b) - 1, -1)
    sites = [(z, _floor_line(m, z)) for z in zs]
    if edge.slope.axis is Axis.Y:
        sites = [(y, x) for x, y in sites]
    return sites


def polygon_lattice_approx(poly: Polygon, n: int = 1) -> SiteSet:
    """Union of the lattice approximations of the edges of ``n * poly``.

    Corners shared by consecutive edges are kept once, at their first
    occurrence along the traversal.  Negative edge slopes are digitized
    directly, so every site lies within one lattice unit below the edge.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    sites = []
    for e in poly.edges:
        sites.extend(_edge_sites(e, n))
    return SiteSet(_dedupe(sites), SiteKind.LATTICE, check=False)


def _bond_path(a, b, major: Axis):
    """4-connected path from a (exclusive) to b (inclusive), major axis first."""
    x, y = a
    out = []
    order = ("x", "y") if major is Axis.X else ("y", "x")
    for coord in order:
        if coord == "x":
            step = 1 if b[0] > x else -1
            while x != b[0]:
                x += step
                out.append((x, y))
        else:
            step = 1 if b[1] > y else -1
            while y != b[1]:
                y += step
                out.append((x, y))
    return out


def polygon_contour_approx(poly: Polygon, n: int = 1) -> SiteSet:
    """4-connected chain through the lattice approximation of ``n * poly``.

    Each diagonal move is filled by first stepping along the edge's major
    axis, which reproduces :func:`contour_approx` on ascending x-axis edges.
    """
    chain: list[tuple[int, int]] = []
    for e in poly.edges:
        for s in _edge_sites(e, n):
            if chain and chain[-1] != s:
                chain.extend(_bond_path(chain[-1], s, e.slope.axis))
            elif not chain:
                chain.append(s)
    if poly.closed and chain and chain[-1] != chain[0]:
        chain.extend(_bond_path(chain[-1], chain[0], poly.edges[0].slope.axis)[:-1])
    return SiteSet(_dedupe(chain), SiteKind.CONTOUR, check=False)


@dataclass(frozen=True)
class CurveSample:
    t: float
    p: tuple[float, float]
    d: tuple[float, float]


@dataclass(frozen=True)
class Curve:
    """Sampled arc-length curve with right derivatives at the samples.

    Positions between samples are linearly interpolated.
    """

    samples: tuple[CurveSample, ...]
    exclude_origin: bool = field(default=False, compare=False)

    def __post_init__(self):
        samples = tuple(
            s if isinstance(s, CurveSample) else CurveSample(float(s[0]), tuple(map(float, s[1])), tuple(map(float, s[2])))
            for s in self.samples
        )
        samples = tuple(CurveSample(float(s.t), tuple(map(float, s.p)), tuple(map(float, s.d))) for s in samples)
        object.__setattr__(self, "samples", samples)
        if len(samples) < 2:
            raise ValueError("need at least two samples")
        if samples[0].t != 0.0:
            raise ValueError("parameter must start at 0")
        ts = [s.t for s in samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample parameters must increase")
        for s in samples:
            if abs(math.hypot(*s.d) - 1) > UNIT_TOLERANCE:
                raise ValueError(f"curve is not arc-length parametrized at t={s.t}")
            if self.exclude_origin and s.p == (0.0, 0.0):
                raise ValueError(f"curve passes through the origin at t={s.t}")

    @property
    def T(self) -> float:
        return self.samples[-1].t

    @property
    def closed(self) -> bool:
        a, b = self.samples[0].p, self.samples[-1].p
        return math.hypot(a[0] - b[0], a[1] - b[1]) < UNIT_TOLERANCE

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.samples]

    def position(self, t: float) -> tuple[float, float]:
        ts = self.times
        if not 0 <= t <= self.T:
            raise ValueError("parameter out of range")
        k = bisect.bisect_right(ts, t) - 1
        s = self.samples[k]
        if s.t == t or k == len(ts) - 1:
            return s.p
        nxt = self.samples[k + 1]
        w = (t - s.t) / (nxt.t - s.t)
        return (s.p[0] + w * (nxt.p[0] - s.p[0]), s.p[1] + w * (nxt.p[1] - s.p[1]))

    def derivative(self, t: float) -> tuple[float, float]:
        k = bisect.bisect_right(self.times, t) - 1
        return self.samples[max(k, 0)].d

    @classmethod
    def from_functions(cls, pos, deriv, T: float, n_samples: int = 1024) -> "Curve":
        ts = np.linspace(0.0, T, n_samples + 1)
        return cls(tuple(CurveSample(float(t), tuple(pos(t)), tuple(deriv(t))) for t in ts))

    @classmethod
    def circle(cls, radius: float = 1.0, center=(0.0, 0.0), n_samples: int = 1024) -> "Curve":
        cx, cy = center

        def pos(t):
            return (cx + radius * math.cos(t / radius), cy + radius * math.sin(t / radius))

        def deriv(t):
            return (-math.sin(t / radius), math.cos(t / radius))

        curve = cls.from_functions(pos, deriv, 2 * math.pi * radius, n_samples)
        # pin the endpoint to the start so the curve is exactly closed
        s = list(curve.samples)
        s[-1] = CurveSample(s[-1].t, s[0].p, s[0].d)
        return cls(tuple(s))

    @classmethod
    def segment(cls, a, b, n_samples: int = 16) -> "Curve":
        a, b = tuple(map(float, a)), tuple(map(float, b))
        L = math.hypot(b[0] - a[0], b[1] - a[1])
        d = ((b[0] - a[0]) / L, (b[1] - a[1]) / L)
        return cls.from_functions(lambda t: (a[0] + t * d[0], a[1] + t * d[1]), lambda t: d, L, n_samples)

    @classmethod
    def from_polygon(cls, poly: Polygon, samples_per_edge: int = 4) -> "Curve":
        out, t = [], 0.0
        for e in poly.edges:
            sx, sy = float(e.start[0]), float(e.start[1])
            d = e.direction
            for j in range(samples_per_edge):
                u = e.length * j / samples_per_edge
                out.append(CurveSample(t + u, (sx + u * d[0], sy + u * d[1]), d))
            t += e.length
        last = poly.edges[-1]
        out.append(CurveSample(t, tuple(map(float, last.end)), last.direction))
        return cls(tuple(out))


def blowup(c: Curve, eta: float) -> Curve:
    """The curve ``t -> eta * c(t / eta)``, still parametrized by arc length."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return Curve(
        tuple(CurveSample(eta * s.t, (eta * s.p[0], eta * s.p[1]), s.d) for s in c.samples),
        exclude_origin=c.exclude_origin,
    )


def _chord_points(c: Curve, N: int):
    if N < 2:
        raise ValueError("N must be at least 2")
    ts = [c.T * k / N for k in range(N + 1)]
    ts[-1] = c.T
    pts = [c.position(t) for t in ts]
    for a, b in zip(pts, pts[1:]):
        if a == b:
            raise ValueError("degenerate chord: consecutive points coincide")
    return ts, pts


def polygonize(c: Curve, N: int) -> Polygon:
    """Chord polygon through ``c`` at ``N + 1`` equispaced parameters.

    Closed curves give closed polygons (reversed if the curve runs clockwise).
    """
    _, pts = _chord_points(c, N)
    if c.closed:
        if N < 3:
            raise ValueError("closed curves need N >= 3")
        return Polygon.oriented(pts[:-1], closed=True)
    return Polygon(tuple(pts), closed=False)


def polygonization_deviation(c: Curve, N: int) -> float:
    """Largest gap between chord velocity and curve tangent over all samples."""
    ts, pts = _chord_points(c, N)
    vel = [
        ((b[0] - a[0]) / (t1 - t0), (b[1] - a[1]) / (t1 - t0))
        for (a, b), (t0, t1) in zip(zip(pts, pts[1:]), zip(ts, ts[1:]))
    ]
    worst = 0.0
    for s in c.samples:
        k = min(bisect.bisect_right(ts, s.t) - 1, N - 1)
        worst = max(worst, math.hypot(vel[k][0] - s.d[0], vel[k][1] - s.d[1]))
    return worst


def equidistribution_check(slope: Slope, t0, U: tuple, n: int) -> float:
    """Fraction of the orbit ``t0, t0 + lam, ..., t0 + n lam`` (mod 1) inside ``U = [lo, hi)``."""
    lo, hi = U
    if not 0 <= lo <= hi <= 1:
        raise ValueError("U must be a subinterval of [0, 1]")
    i = np.arange(n + 1, dtype=np.int64)
    if slope.is_rational and _is_exact(_exact(t0)):
        t0 = Fraction(_exact(t0))
        den = slope.q * t0.denominator
        num = (t0.numerator * slope.q + i * (slope.p * t0.denominator)) % den
        # compare num/den with lo, hi without rounding
        lo_f, hi_f = Fraction(_exact(lo)), Fraction(_exact(hi))
        lo_n = lo_f * den
        hi_n = hi_f * den
        inside = (num >= math.ceil(lo_n)) & (num < math.ceil(hi_n))
        return float(np.count_nonzero(inside)) / (n + 1)
    # each step is reduced so the orbit never drifts far from [0, 1)
    lam = float(slope.value)
    orbit = np.mod(float(t0) + np.mod(i * lam, 1.0), 1.0)
    return float(np.count_nonzero((orbit >= lo) & (orbit < hi))) / (n + 1)


def ratio_lattice_to_length(lam, k: int, interval=(0, 1), intercept=0) -> float:
    """Sites of the lattice approximation of ``k * l`` over ``k * interval``, per unit length."""
    a, b = interval
    if b <= a:
        raise ValueError("interval must have positive length")
    if k <= 0:
        raise ValueError("k must be positive")
    lam = _exact(lam)
    if abs(lam) > 1:
        raise ValueError("|lam| must be at most 1")
    lo, hi = math.ceil(_exact(k) * _exact(a)), math.floor(_exact(k) * _exact(b))
    count = max(0, hi - lo + 1)
    length = float(k) * float(b - a) * math.sqrt(1 + float(lam) ** 2)
    return count / length


def polygon_ratio_lattice_to_length(poly: Polygon, k: int) -> float:
    return len(polygon_lattice_approx(poly, k)) / (k * poly.length)


def lattice_length_factor(poly: Polygon) -> float:
    """Limit of :func:`polygon_ratio_lattice_to_length` as ``k`` grows."""
    return math.fsum(e.length / math.sqrt(1 + float(e.slope.value) ** 2) for e in poly.edges) / poly.length


def site_offsets(sites: Sequence[tuple[int, int]], origin: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    ox, oy = origin
    return tuple((x - ox, y - oy) for x, y in sites)
