"""Surface-order lower bounds for droplets of one phase inside another.

The bound for a droplet shaped like the polygon ``pi`` (area ``alpha``) is

    gamma(pi) = sum_r  length_r / (4 sqrt(1 + lam_r^2)) * h_r,

where ``lam_r`` is the slope magnitude of edge ``r`` and ``h_r`` the relative
entropy of the two phases along that direction.  For the square of area
``alpha`` this reduces to ``sqrt(alpha) * s``.

:func:`optimize_shape` searches polygons of fixed area for a smaller value,
so every value it returns is an upper bound on the infimum over shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .fields import IsingModel
from .geometry import (
    Polygon,
    SiteSet,
    polygon_contour_approx,
    polygon_lattice_approx,
    regular_polygon,
)

__all__ = [
    "DropletSpec",
    "EdgeTerm",
    "BoundValue",
    "RegularKGon",
    "VertexFree",
    "ShapeResult",
    "CachedOracle",
    "MarkovReport",
    "interior_lattice_points",
    "droplet_sets",
    "bound_functional",
    "polygon_bound",
    "box_bound",
    "optimize_shape",
    "markov_blanket_deviation",
    "markov_boundary_check",
]


# --- droplets ---------------------------------------------------------------


def interior_lattice_points(poly: Polygon, scale=1, box: int | None = None) -> np.ndarray:
    """Lattice points strictly inside ``scale * poly``, optionally within ``[-box, box]^2``.

    A vectorized even-odd test does the bulk of the work; points within
    rounding distance of an edge line are re-decided in exact arithmetic.
    """
    verts = [(float(scale * x), float(scale * y)) for x, y in poly.vertices]
    vx = np.array([v[0] for v in verts])
    vy = np.array([v[1] for v in verts])
    lo_x, hi_x = math.floor(vx.min()), math.ceil(vx.max())
    lo_y, hi_y = math.floor(vy.min()), math.ceil(vy.max())
    if box is not None:
        lo_x, lo_y = max(lo_x, -box), max(lo_y, -box)
        hi_x, hi_y = min(hi_x, box), min(hi_y, box)
    if lo_x > hi_x or lo_y > hi_y:
        return np.zeros((0, 2), np.int64)
    xs, ys = np.meshgrid(np.arange(lo_x, hi_x + 1), np.arange(lo_y, hi_y + 1), indexing="ij")
    X, Y = xs.ravel().astype(float), ys.ravel().astype(float)
    inside = np.zeros(X.shape, bool)
    near = np.zeros(X.shape, bool)
    span = max(1.0, float(np.abs(vx).max()), float(np.abs(vy).max()))
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        seg = math.hypot(x1 - x0, y1 - y0)
        cross = (x1 - x0) * (Y - y0) - (y1 - y0) * (X - x0)
        near |= np.abs(cross) <= 1e-9 * seg * span
        cond = (y0 > Y) != (y1 > Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (Y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= cond & (X < xint)
    if near.any():
        scaled = Polygon(tuple((scale * x, scale * y) for x, y in poly.vertices))
        for j in np.nonzero(near)[0]:
            inside[j] = scaled.contains((int(X[j]), int(Y[j])))
    pts = np.stack([X[inside], Y[inside]], 1).astype(np.int64)
    return pts


@dataclass(frozen=True)
class DropletSpec:
    polygon: Polygon
    alpha: float
    n: int
    k_n: int
    l_n: int
    C_sites: SiteSet
    D_sites: SiteSet

    @property
    def volume(self) -> int:
        return (2 * self.n + 1) ** 2

    @property
    def c_fraction(self) -> float:
        return len(self.C_sites) / self.volume

    @property
    def d_fraction(self) -> float:
        return len(self.D_sites) / self.volume


def _box_sites(n: int) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    return np.stack([xs.ravel(), ys.ravel()], 1).astype(np.int64)


def _row_keys(pts: np.ndarray, n: int) -> np.ndarray:
    w = 2 * n + 1
    return (pts[:, 0] + n) * w + (pts[:, 1] + n)


def droplet_sets(poly: Polygon, alpha: float, n: int) -> DropletSpec:
    """Inner set ``C`` of the droplet scaled by ``k_n`` and outer set ``D`` outside ``l_n``.

    ``k_n = floor(sqrt(alpha |V_n| / area))`` and ``l_n = floor(k_n + sqrt(n))``
    with ``V_n = [-n, n]^2``.  For ``alpha = 1`` the inner set is all of
    ``V_n`` and the outer set is empty.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if n < 1:
        raise ValueError("n must be positive")
    if not poly.closed or not poly.contains((0, 0)):
        raise ValueError("the origin must lie inside the polygon")
    volume = (2 * n + 1) ** 2
    if _exactish(poly, alpha):
        # floor(sqrt(x)) == isqrt(floor(x)) for x >= 0
        k = math.isqrt(math.floor(Fraction(alpha) * volume / Fraction(poly.signed_area)))
    else:
        k = math.floor(math.sqrt(alpha * volume / poly.area))
    l = math.floor(k + math.sqrt(n))
    box = _box_sites(n)
    if alpha == 1:
        C = box
        D = np.zeros((0, 2), np.int64)
    else:
        C = interior_lattice_points(poly, k, box=n)
        outer = interior_lattice_points(poly, l, box=n)
        keep = ~np.isin(_row_keys(box, n), _row_keys(outer, n))
        D = box[keep]
        if np.isin(_row_keys(C, n), _row_keys(D, n)).any():
            raise ValueError("inner and outer droplet sets overlap; the polygon is not star-shaped about 0")
    return DropletSpec(poly, alpha, n, k, l, SiteSet(C, check=False), SiteSet(D, check=False))


def _exactish(poly: Polygon, alpha) -> bool:
    return isinstance(alpha, (int, Fraction)) and all(isinstance(c, (int, Fraction)) for v in poly.vertices for c in v)


# --- the bound functional ----------------------------------------------------


@dataclass(frozen=True)
class EdgeTerm:
    index: int
    length: float
    lam: float
    factor: float
    h: float
    contribution: float


@dataclass(frozen=True)
class BoundValue:
    gamma: float
    per_edge: tuple[EdgeTerm, ...] = field(default=())

    def rows(self) -> list[dict]:
        return [
            {"edge": e.index, "lambda": e.lam, "factor": e.factor, "length": e.length, "h": e.h, "contribution": e.contribution}
            for e in self.per_edge
        ]


def _edge_geometry(poly: Polygon):
    for i, (a, b) in enumerate(poly._segments()):
        dx, dy = abs(float(b[0] - a[0])), abs(float(b[1] - a[1]))
        lam = min(dx, dy) / max(dx, dy)
        yield i, math.hypot(dx, dy), lam, (a, b)


def bound_functional(poly: Polygon, edge_entropies: Sequence[float]) -> BoundValue:
    """``sum_r length_r / 4 / sqrt(1 + lam_r^2) * h_r`` over the edges of ``poly``."""
    geo = list(_edge_geometry(poly))
    if len(geo) != len(edge_entropies):
        raise ValueError(f"{len(geo)} edges but {len(edge_entropies)} entropies")
    terms = []
    for (i, length, lam, _), h in zip(geo, edge_entropies):
        factor = 1.0 / math.sqrt(1.0 + lam * lam)
        terms.append(EdgeTerm(i, length, lam, factor, float(h), factor * (length / 4.0) * float(h)))
    return BoundValue(math.fsum(t.contribution for t in terms), tuple(terms))


def _edge_direction(a, b):
    dx, dy = float(b[0] - a[0]), float(b[1] - a[1])
    L = math.hypot(dx, dy)
    return dx / L, dy / L


def polygon_bound(poly: Polygon, oracle: Callable) -> BoundValue:
    """Bound functional with ``h_r = oracle(unit direction of edge r)``."""
    hs = [oracle(_edge_direction(a, b)) for a, b in poly._segments()]
    return bound_functional(poly, hs)


def box_bound(alpha: float, s: float) -> float:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if s < 0:
        raise ValueError("s must be nonnegative")
    return math.sqrt(alpha) * s


# --- shape search -------------------------------------------------------------


class CachedOracle:
    """Memoize a direction oracle on a grid of angles (degrees)."""

    def __init__(self, func: Callable, resolution_deg: float = 1.0):
        if resolution_deg <= 0:
            raise ValueError("resolution must be positive")
        self.func = func
        self.resolution = resolution_deg
        self.cache: dict[int, float] = {}

    def __call__(self, v) -> float:
        steps = round(360.0 / self.resolution)
        k = round(math.degrees(math.atan2(v[1], v[0])) / self.resolution) % steps
        if k not in self.cache:
            phi = math.radians(k * self.resolution)
            self.cache[k] = float(self.func((math.cos(phi), math.sin(phi))))
        return self.cache[k]


@dataclass(frozen=True)
class RegularKGon:
    k_values: tuple[int, ...] = tuple(range(4, 65))


@dataclass(frozen=True)
class VertexFree:
    n_vertices: int = 8


@dataclass
class ShapeResult:
    polygon: Polygon
    bound: BoundValue
    trace: list[tuple[int, float, bool]]
    converged: bool


def _move(verts, kind, j, step):
    out = list(verts)
    x, y = out[j]
    if kind == "angle":
        c, s = math.cos(step), math.sin(step)
        out[j] = (c * x - s * y, s * x + c * y)
    elif kind == "radius":
        r = math.hypot(x, y)
        out[j] = (x * (r + step) / r, y * (r + step) / r)
    else:
        # slide the edge along its normal, keeping the neighbouring edge directions
        n = len(out)
        i, k, l = (j - 1) % n, (j + 1) % n, (j + 2) % n
        dx, dy = out[k][0] - x, out[k][1] - y
        L = math.hypot(dx, dy)
        px, py = x + dy / L * step, y - dx / L * step
        out[j] = _intersect((px, py), (dx, dy), out[i], (x - out[i][0], y - out[i][1]))
        out[k] = _intersect((px, py), (dx, dy), out[l], (out[k][0] - out[l][0], out[k][1] - out[l][1]))
    return out


def _intersect(p, d, q, e):
    """Intersection of the lines ``p + s d`` and ``q + t e``."""
    det = d[0] * e[1] - d[1] * e[0]
    if abs(det) < 1e-15:
        raise ValueError("parallel edges")
    s = ((q[0] - p[0]) * e[1] - (q[1] - p[1]) * e[0]) / det
    return (p[0] + s * d[0], p[1] + s * d[1])


def _rescaled(verts, alpha) -> Polygon:
    poly = Polygon(tuple(verts))
    s = math.sqrt(alpha / poly.area)
    return Polygon(tuple((s * x, s * y) for x, y in verts))


def optimize_shape(
    alpha: float,
    oracle: Callable,
    family,
    budget: int = 2000,
    seed: int = 0,
    resolution_deg: float | None = None,
) -> ShapeResult:
    """Local derivative-free search for a polygon of area ``alpha`` with small bound.

    ``RegularKGon`` scans the given vertex counts and descends on the
    rotation.  ``VertexFree`` runs coordinate descent over single-vertex
    rotations and radial moves about the origin plus translations of single
    edges along their normals; non-simple candidates are skipped.  Every candidate is rescaled to area ``alpha``.
    The trace lists ``(iteration, gamma, accepted)`` for every evaluation;
    the incumbent never increases.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if budget < 1:
        raise ValueError("budget must be positive")
    if resolution_deg is not None:
        oracle = CachedOracle(oracle, resolution_deg)
    rng = np.random.default_rng(seed)
    trace: list[tuple[int, float, bool]] = []
    best: list = [None, math.inf]

    def evaluate(poly):
        val = polygon_bound(poly, oracle)
        ok = val.gamma < best[1]
        if ok:
            best[0], best[1] = (poly, val), val.gamma
        trace.append((len(trace), val.gamma, ok))
        return val.gamma

    if isinstance(family, RegularKGon):
        ks = list(family.k_values)
        if not ks or min(ks) < 3:
            raise ValueError("regular polygons need at least three vertices")
        per_k = max(1, budget // len(ks))
        for k in ks:
            if len(trace) >= budget:
                break
            phi, g = 0.0, evaluate(regular_polygon(k, alpha))
            step, used = math.pi / k / 2, 1
            while used < per_k and step > 1e-9 and len(trace) < budget:
                moved = False
                for cand in (phi + step, phi - step):
                    if used >= per_k or len(trace) >= budget:
                        break
                    gc = evaluate(regular_polygon(k, alpha, rotation=cand))
                    used += 1
                    if gc < g:
                        phi, g, moved = cand, gc, True
                        break
                if not moved:
                    step /= 2
            if best[1] == 0:
                break
        converged = best[1] == 0
    elif isinstance(family, VertexFree):
        V = family.n_vertices
        if V < 3:
            raise ValueError("polygons need at least three vertices")
        verts = [(float(x), float(y)) for x, y in regular_polygon(V, alpha).vertices]
        g = evaluate(Polygon(tuple(verts)))
        converged = g == 0
        r0 = math.sqrt(alpha)
        # per move kind: vertex angle, vertex radius, edge translation along its normal
        steps = {"angle": math.pi / V / 2, "radius": 0.1 * r0, "edge": 0.1 * r0}
        while not converged and len(trace) < budget:
            improved = False
            moves = [(kind, j) for kind in steps for j in range(V)]
            for m in rng.permutation(len(moves)):
                kind, j = moves[m]
                if len(trace) >= budget:
                    break
                for sign in (1, -1):
                    if len(trace) >= budget:
                        break
                    try:
                        poly = _rescaled(_move(verts, kind, j, sign * steps[kind]), alpha)
                    except ValueError:
                        continue
                    gc = evaluate(poly)
                    if gc < g:
                        verts, g, improved = [tuple(map(float, v)) for v in poly.vertices], gc, True
                        break
            if not improved:
                steps = {k: v / 2 for k, v in steps.items()}
                if max(steps.values()) < 1e-9:
                    converged = True
    else:
        raise TypeError(f"unknown shape family {family!r}")
    poly, val = best[0]
    return ShapeResult(poly, val, trace, converged)


# --- Markov property at the boundary ---------------------------------------


@dataclass(frozen=True)
class MarkovReport:
    boundary: str
    deviation: float
    interior: int
    boundary_sites: int
    leak_sites: int
    patterns: int


MAX_PATTERN_BITS = 20
MAX_INTERIOR = 16


def _neighbours(site):
    x, y = site
    return ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))


def markov_blanket_deviation(model: IsingModel, interior, boundary) -> tuple[float, int, int]:
    """Largest change of ``E[magnetization of interior | outside]`` across leak patterns.

    The law of the interior given everything outside depends only on its
    outer neighbours.  Neighbours in ``boundary`` are held fixed; the
    remaining ones (leaks) are varied.  The deviation is the maximum over
    boundary patterns of the range of the conditional mean over leak
    patterns, computed by exact enumeration.  It is zero exactly when
    ``boundary`` shields the interior.

    Returns ``(deviation, n_boundary_neighbours, n_leaks)``.
    """
    A = list(dict.fromkeys(interior))
    Aset, Bset = set(A), set(boundary)
    if not A:
        raise ValueError("empty interior")
    if len(A) > MAX_INTERIOR:
        raise ValueError(f"interior larger than {MAX_INTERIOR} sites")
    nbrs = list(dict.fromkeys(nb for s in A for nb in _neighbours(s) if nb not in Aset))
    NB = [s for s in nbrs if s in Bset]
    NE = [s for s in nbrs if s not in Bset]
    if len(NB) + len(NE) > MAX_PATTERN_BITS:
        raise ValueError(f"boundary pattern space exceeds 2^{MAX_PATTERN_BITS}")
    if not NE or model.beta == 0:
        return 0.0, len(NB), len(NE)
    N = NB + NE
    idx_a = {s: i for i, s in enumerate(A)}
    idx_n = {s: i for i, s in enumerate(N)}
    adj_aa = [(idx_a[s], idx_a[nb]) for s in A for nb in _neighbours(s) if nb in idx_a and idx_a[nb] > idx_a[s]]
    adj_an = np.zeros((len(N), len(A)))
    for s in A:
        for nb in _neighbours(s):
            if nb in idx_n:
                adj_an[idx_n[nb], idx_a[s]] += 1
    a_codes = np.arange(2 ** len(A))
    a_spins = 2.0 * ((a_codes[:, None] >> np.arange(len(A))) & 1) - 1.0
    e_int = model.beta * sum(a_spins[:, i] * a_spins[:, j] for i, j in adj_aa) + model.external_field * a_spins.sum(1)
    phi = a_spins.mean(1)
    n_codes = np.arange(2 ** len(N))
    means = np.empty(len(n_codes))
    chunk = max(1, (1 << 22) // len(a_codes))
    for lo in range(0, len(n_codes), chunk):
        codes = n_codes[lo : lo + chunk]
        n_spins = 2.0 * ((codes[:, None] >> np.arange(len(N))) & 1) - 1.0
        logits = e_int[None, :] + model.beta * (n_spins @ adj_an) @ a_spins.T
        logits -= logits.max(1, keepdims=True)
        w = np.exp(logits)
        means[lo : lo + chunk] = (w @ phi) / w.sum(1)
    # codes enumerate NB in the low bits and NE in the high bits
    table = means.reshape(2 ** len(NE), 2 ** len(NB))
    dev = float((table.max(0) - table.min(0)).max())
    return dev, len(NB), len(NE)


def markov_boundary_check(
    model: IsingModel, poly: Polygon, window: tuple[int, int] = (7, 7), boundary: str = "contour"
) -> MarkovReport:
    """Check by exact enumeration whether the polygon's digitized boundary shields its interior.

    ``poly`` is given in window coordinates; lattice sites run over
    ``[0, width) x [0, height)``.  The interior is every window site strictly
    inside ``poly`` that is not a boundary site.
    """
    if not isinstance(model, IsingModel):
        raise TypeError("the Markov check needs an Ising model")
    W, H = window
    if W * H > 15 * 15:
        raise ValueError("window too large for exact enumeration")
    if boundary == "lattice":
        B = polygon_lattice_approx(poly, 1)
    elif boundary == "contour":
        B = polygon_contour_approx(poly, 1)
    else:
        raise ValueError("boundary is 'lattice' or 'contour'")
    in_window = lambda s: 0 <= s[0] < W and 0 <= s[1] < H  # noqa: E731
    Bset = {s for s in B if in_window(s)}
    A = [s for s in map(tuple, interior_lattice_points(poly, 1).tolist()) if in_window(s) and s not in Bset]
    for s in A:
        if not all(in_window(nb) for nb in _neighbours(s)):
            raise ValueError("the interior touches the window edge")
    dev, nb, ne = markov_blanket_deviation(model, A, Bset)
    return MarkovReport(boundary, dev, len(A), len(Bset), ne, 2 ** (nb + ne))
