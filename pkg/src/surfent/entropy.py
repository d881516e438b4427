"""Specific entropies of random fields along lines, polygons and curves.

The specific entropy along a line with slope ``lam`` is the torus average of
conditional entropies ``H(X_0 | past)``, where the past is the lattice
approximation of the line to the left of the origin.  For product measures
these quantities are known in closed form; for Gibbs fields they are
estimated with plug-in tables built from sampled snapshots:

* a past window is encoded as an integer pattern code,
* counts of ``(pattern, symbol)`` are smoothed with a Laplace pseudocount,
* standard errors come from a delete-one-group jackknife over blocks of
  snapshots, which also supplies a first-order bias correction.

One :class:`FieldBank` of snapshots is shared by every window, torus point
and polygon edge of a computation, so the jackknife replicates of different
terms can be combined linearly.

All logarithms are natural; values are in nats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .fields import (
    Boundary,
    IidModel,
    IsingModel,
    SamplerConfig,
    derive_seed,
    exact_joint,
    gibbs_snapshots,
    iid_snapshots,
)
from .geometry import (
    Axis,
    Curve,
    LinearMap,
    Polygon,
    SiteKind,
    SiteSet,
    Slope,
    contour_approx,
    frac,
    polygonization_deviation,
    polygonize,
    skew_offset,
    torus_translate,
)

__all__ = [
    "Variant",
    "PastWindowSpec",
    "EntropyEstimate",
    "EstimationConfig",
    "InsufficientSamplesError",
    "ConditionalTable",
    "ConditionalEntropyEstimator",
    "RelativeEntropyEstimator",
    "FieldBank",
    "make_bank_pair",
    "ExactIidConditionals",
    "PluginConditionals",
    "ConvergenceRow",
    "past_sites",
    "conditional_entropy",
    "rescaled_information",
    "line_entropy_rational",
    "line_entropy_irrational",
    "line_entropy",
    "polygon_entropy",
    "curve_entropy",
    "contour_line_entropy",
    "relative_conditional_entropy",
    "relative_line_entropy",
    "relative_polygon_entropy",
    "relative_entropy_curve",
    "fo_specific_entropy",
    "convergence_experiment",
    "kl_divergence",
    "inverse_triangle_gap",
    "exact_window_conditional_entropy",
]

MAX_CODE_BITS = 52


class Variant(str, enum.Enum):
    LATTICE = "lattice"
    CONTOUR_SHARP = "contour_sharp"
    CONTOUR_WITH_ABOVE = "contour_with_above"


@dataclass(frozen=True)
class PastWindowSpec:
    """Depth-``depth`` past of the origin along a line through torus point ``t``."""

    slope: Slope
    torus_point: float | Fraction = 0
    depth: int = 6
    variant: Variant = Variant.LATTICE

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if not 0 <= self.torus_point < 1:
            raise ValueError("torus point must lie in [0, 1)")
        if self.slope.value < 0:
            raise ValueError("past windows use the slope magnitude; pass abs(slope)")


def past_sites(spec: PastWindowSpec) -> SiteSet:
    """Offsets of the conditioning sites, nearest to the origin first."""
    lam, t, i = spec.slope.value, spec.torus_point, spec.depth
    m = LinearMap(Slope(spec.slope.p, spec.slope.q, spec.slope.real, Axis.X), t)
    if spec.variant is Variant.LATTICE:
        sites = [(z, math.floor(m(z))) for z in range(-1, -i - 1, -1)]
        kind = SiteKind.LATTICE
    else:
        chain = contour_approx(m, -i, -1).to_list()[::-1]
        if spec.variant is Variant.CONTOUR_SHARP:
            extra = [(0, -1)] if torus_translate(spec.slope, t, -1) >= 1 - lam else []
        else:
            extra = [(0, 1)]
        sites = extra + chain
        kind = SiteKind.CONTOUR
    out = SiteSet(sites, kind)
    return out.swapped() if spec.slope.axis is Axis.Y else out


class InsufficientSamplesError(ValueError):
    def __init__(self, required: int, given: int):
        super().__init__(f"need at least {required} samples, got {given}")
        self.required = required
        self.given = given


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    std_error: float
    depth: int
    samples: int
    method: str
    grid: int | None = None
    metadata: dict = field(default_factory=dict, compare=False)
    replicates: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("negative standard error")
        if self.method not in ("exact", "monte_carlo", "quadrature"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def method_label(self) -> str:
        return f"quadrature({self.grid})" if self.method == "quadrature" else self.method

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "depth": self.depth,
            "samples": self.samples,
            "method": self.method_label,
        }


@dataclass(frozen=True)
class EstimationConfig:
    """Plug-in estimation settings shared by every Monte Carlo route."""

    pseudocount: float = 0.5
    n_groups: int = 20
    bias_correction: bool = True
    sampler: SamplerConfig = SamplerConfig(seed=0, burn_in_sweeps=1000, thinning_sweeps=10, replicas=4)
    shape: tuple[int, int] | None = None
    margin: int | None = None

    def __post_init__(self):
        if self.pseudocount <= 0:
            raise ValueError("pseudocount must be positive")
        if self.n_groups < 2:
            raise ValueError("the jackknife needs at least two groups")

    def describe(self) -> dict:
        return {
            "pseudocount": self.pseudocount,
            "n_groups": self.n_groups,
            "bias_correction": self.bias_correction,
            "sampler": self.sampler.describe(),
            "shape": list(self.shape) if self.shape else None,
            "margin": self.margin,
        }


# --- plug-in tables -------------------------------------------------------


def _pattern_codes(X: np.ndarray, offsets, n_symbols: int, periodic: bool, margin: int):
    """Pattern codes and origin symbols for every usable site of every snapshot.

    Returns two ``(n, sites)`` int64 arrays.
    """
    n, H, W = X.shape
    offsets = [tuple(int(c) for c in o) for o in offsets]
    if len(offsets) * math.log2(n_symbols) > MAX_CODE_BITS:
        raise ValueError("past window too large to encode")
    if periodic:
        origin = X.reshape(n, -1).astype(np.int64)
        codes = np.zeros_like(origin)
        for j, (dx, dy) in enumerate(offsets):
            shifted = np.roll(X, shift=(-dy, -dx), axis=(1, 2)).reshape(n, -1)
            codes += shifted.astype(np.int64) * n_symbols**j
        return codes, origin
    reach = max((max(abs(dx), abs(dy)) for dx, dy in offsets), default=0)
    if reach > margin:
        raise ValueError(f"window reaches {reach} sites but the margin is {margin}")
    if 2 * margin >= min(H, W):
        raise ValueError("margin leaves no usable sites")
    core = (slice(None), slice(margin, H - margin), slice(margin, W - margin))
    origin = X[core].reshape(n, -1).astype(np.int64)
    codes = np.zeros_like(origin)
    for j, (dx, dy) in enumerate(offsets):
        part = X[:, margin + dy : H - margin + dy, margin + dx : W - margin + dx]
        codes += part.reshape(n, -1).astype(np.int64) * n_symbols**j
    return codes, origin


def _encode(patterns: np.ndarray, n_symbols: int) -> np.ndarray:
    patterns = np.asarray(patterns, dtype=np.int64)
    if patterns.ndim == 1:
        patterns = patterns[:, None]
    weights = n_symbols ** np.arange(patterns.shape[1], dtype=np.int64)
    return patterns @ weights if patterns.shape[1] else np.zeros(len(patterns), np.int64)


def _smoothed(counts: np.ndarray, alpha: float) -> np.ndarray:
    K = counts.shape[-1]
    return (counts + alpha) / (counts.sum(-1, keepdims=True) + K * alpha)


def _conditional_entropy_from_counts(counts: np.ndarray, alpha: float) -> np.ndarray:
    """Plug-in ``sum_p w_p H(p_hat(.|p))`` over the last two axes."""
    probs = _smoothed(counts, alpha)
    n_p = counts.sum(-1)
    h_p = -(probs * np.log(probs)).sum(-1)
    return (n_p * h_p).sum(-1) / n_p.sum(-1)


def _relative_entropy_from_counts(minus: np.ndarray, plus: np.ndarray, alpha: float) -> np.ndarray:
    p = _smoothed(minus, alpha)
    q = _smoothed(plus, alpha)
    n_p = minus.sum(-1)
    kl = (p * np.log(p / q)).sum(-1)
    return (n_p * kl).sum(-1) / n_p.sum(-1)


def _jackknife(full: float, loo: np.ndarray, bias_correction: bool):
    G = len(loo)
    mean = loo.mean()
    se = math.sqrt((G - 1) / G * float(((loo - mean) ** 2).sum()))
    value = G * full - (G - 1) * mean if bias_correction else full
    # pseudo-replicates whose linear combinations reproduce value and se
    reps = loo + (value - mean)
    return value, se, reps


@dataclass
class ConditionalTable:
    """Counts of origin symbols per past pattern, optionally split by group."""

    offsets: tuple
    n_symbols: int
    patterns: np.ndarray
    counts: np.ndarray
    group_counts: np.ndarray | None = None
    pseudocount: float = 0.5

    @classmethod
    def from_codes(cls, offsets, n_symbols, codes, origin, groups=None, n_groups=None, pseudocount=0.5):
        codes = np.asarray(codes, np.int64).ravel()
        origin = np.asarray(origin, np.int64).ravel()
        patterns, inverse = np.unique(codes, return_inverse=True)
        P, K = len(patterns), n_symbols
        counts = np.bincount(inverse * K + origin, minlength=P * K).reshape(P, K)
        group_counts = None
        if groups is not None:
            groups = np.asarray(groups, np.int64).ravel()
            G = n_groups if n_groups is not None else int(groups.max()) + 1
            group_counts = np.bincount((groups * P + inverse) * K + origin, minlength=G * P * K).reshape(G, P, K)
        return cls(tuple(offsets), n_symbols, patterns, counts, group_counts, pseudocount)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        return _smoothed(self.counts, self.pseudocount)

    def lookup(self, codes) -> np.ndarray:
        """Row index of each code, or -1 for patterns never observed."""
        codes = np.asarray(codes, np.int64)
        idx = np.searchsorted(self.patterns, codes)
        idx = np.minimum(idx, len(self.patterns) - 1)
        return np.where(self.patterns[idx] == codes, idx, -1)

    def conditional(self, codes) -> np.ndarray:
        """Smoothed conditional laws for the given codes; unseen patterns are uniform."""
        idx = self.lookup(codes)
        probs = self.probabilities()
        out = np.full((len(idx), self.n_symbols), 1.0 / self.n_symbols)
        seen = idx >= 0
        out[seen] = probs[idx[seen]]
        return out

    def entropy(self) -> float:
        return float(_conditional_entropy_from_counts(self.counts, self.pseudocount))

    def merge(self, other: "ConditionalTable") -> "ConditionalTable":
        """Sum of two count tables over the same window."""
        if other.offsets != self.offsets or other.n_symbols != self.n_symbols:
            raise ValueError("tables are over different windows")
        patterns = np.union1d(self.patterns, other.patterns)
        counts = np.zeros((len(patterns), self.n_symbols), np.int64)
        counts[np.searchsorted(patterns, self.patterns)] += self.counts
        counts[np.searchsorted(patterns, other.patterns)] += other.counts
        return ConditionalTable(self.offsets, self.n_symbols, patterns, counts, None, self.pseudocount)

    def aligned(self, patterns: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        """Counts (and group counts) re-indexed onto ``patterns``, zero where unseen."""
        idx = np.searchsorted(patterns, self.patterns)
        counts = np.zeros((len(patterns), self.n_symbols), np.int64)
        counts[idx] = self.counts
        gc = None
        if self.group_counts is not None:
            gc = np.zeros((len(self.group_counts), len(patterns), self.n_symbols), np.int64)
            gc[:, idx] = self.group_counts
        return counts, gc


def _as_snapshots(X) -> np.ndarray:
    if isinstance(X, np.ndarray):
        arr = X
    else:
        arr = np.stack([getattr(c, "values", c) for c in X])
    arr = check_array(arr, allow_nd=True, dtype=None, ensure_all_finite=True)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError("expected snapshots of shape (n, H, W)")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise ValueError("snapshots must hold integer symbol indices")
        arr = arr.astype(np.int64)
    return arr


def _default_groups(n: int, n_groups: int) -> np.ndarray:
    G = min(n_groups, n)
    if G < 2:
        raise ValueError("the jackknife needs at least two snapshots")
    return np.concatenate([np.full(len(b), g) for g, b in enumerate(np.array_split(np.arange(n), G))])


class _PluginBase(BaseEstimator):
    def _check_snapshots(self, X):
        X = _as_snapshots(X)
        if X.min() < 0 or X.max() >= self.n_symbols:
            raise ValueError("symbol index out of range")
        return X

    def _table(self, X, groups):
        groups = _default_groups(len(X), self.n_groups) if groups is None else np.asarray(groups)
        if len(groups) != len(X):
            raise ValueError("one group label per snapshot")
        margin = self.margin if self.margin is not None else _reach(self.offsets)
        codes, origin = _pattern_codes(X, self.offsets, self.n_symbols, self.periodic, margin)
        site_groups = np.repeat(groups, codes.shape[1])
        G = int(groups.max()) + 1
        return ConditionalTable.from_codes(
            self.offsets, self.n_symbols, codes, origin, site_groups, G, self.pseudocount
        )


def _reach(offsets) -> int:
    return max((max(abs(dx), abs(dy)) for dx, dy in offsets), default=0)


class ConditionalEntropyEstimator(_PluginBase):
    """Plug-in estimate of ``H(X_0 | X_offsets)`` from stationary snapshots.

    Parameters
    ----------
    offsets : sequence of (dx, dy)
        Conditioning sites relative to the predicted site.
    n_symbols : int
        Alphabet size.
    pseudocount : float
        Laplace smoothing added to every ``(pattern, symbol)`` cell.
    n_groups : int
        Number of snapshot blocks for the delete-one-group jackknife.
    periodic : bool
        Wrap windows around the snapshot edges instead of using a margin.
    margin : int or None
        Border excluded from non-periodic snapshots; defaults to the window reach.
    bias_correction : bool
        Report the jackknife bias-corrected value.

    Attributes
    ----------
    table_ : ConditionalTable
    entropy_ : float
    std_error_ : float
    n_samples_ : int
    """

    def __init__(
        self,
        offsets=((-1, 0),),
        n_symbols=2,
        pseudocount=0.5,
        n_groups=20,
        periodic=True,
        margin=None,
        bias_correction=True,
    ):
        self.offsets = offsets
        self.n_symbols = n_symbols
        self.pseudocount = pseudocount
        self.n_groups = n_groups
        self.periodic = periodic
        self.margin = margin
        self.bias_correction = bias_correction

    def fit(self, X, y=None, groups=None):
        X = self._check_snapshots(X)
        self.offsets = tuple(tuple(int(c) for c in o) for o in self.offsets)
        table = self._table(X, groups)
        full = float(_conditional_entropy_from_counts(table.counts, self.pseudocount))
        loo = _conditional_entropy_from_counts(table.counts[None] - table.group_counts, self.pseudocount)
        self.entropy_, self.std_error_, self.replicates_ = _jackknife(full, loo, self.bias_correction)
        self.plugin_entropy_ = full
        self.table_ = table
        self.n_samples_ = table.total
        return self

    def predict_proba(self, patterns):
        """Smoothed conditional laws for rows of past symbols (nearest first)."""
        check_is_fitted(self, "table_")
        patterns = np.atleast_2d(np.asarray(patterns, np.int64))
        if patterns.shape[1] != len(self.offsets):
            raise ValueError(f"expected {len(self.offsets)} past symbols per row")
        return self.table_.conditional(_encode(patterns, self.n_symbols))

    def predict(self, patterns):
        return self.predict_proba(patterns).argmax(axis=1)

    def score_samples(self, X):
        """Per-site information ``-log p_hat(x_0 | past)``, shape ``(n, sites)``."""
        check_is_fitted(self, "table_")
        X = self._check_snapshots(X)
        margin = self.margin if self.margin is not None else _reach(self.offsets)
        codes, origin = _pattern_codes(X, self.offsets, self.n_symbols, self.periodic, margin)
        probs = self.table_.conditional(codes.ravel())
        return -np.log(probs[np.arange(len(probs)), origin.ravel()]).reshape(codes.shape)

    def score(self, X, y=None):
        return -float(self.score_samples(X).mean())


class RelativeEntropyEstimator(_PluginBase):
    """Plug-in ``E_minus KL(p_minus(.|past) || p_plus(.|past))``.

    ``fit(X, X_reference)`` takes snapshots of the first measure and of the
    reference measure; both are split into the same number of jackknife
    groups, which are paired by index.
    """

    def __init__(
        self,
        offsets=((-1, 0),),
        n_symbols=2,
        pseudocount=0.5,
        n_groups=20,
        periodic=True,
        margin=None,
        bias_correction=True,
    ):
        self.offsets = offsets
        self.n_symbols = n_symbols
        self.pseudocount = pseudocount
        self.n_groups = n_groups
        self.periodic = periodic
        self.margin = margin
        self.bias_correction = bias_correction

    def fit(self, X, X_reference, groups=None, groups_reference=None):
        X = self._check_snapshots(X)
        R = self._check_snapshots(X_reference)
        self.offsets = tuple(tuple(int(c) for c in o) for o in self.offsets)
        t_minus = self._table(X, groups)
        t_plus = self._table(R, groups_reference)
        if len(t_minus.group_counts) != len(t_plus.group_counts):
            raise ValueError("both samples need the same number of groups")
        self.divergence_, self.std_error_, self.replicates_, self.unseen_mass_ = _relative_from_tables(
            t_minus, t_plus, self.pseudocount, self.bias_correction
        )
        self.table_, self.reference_table_ = t_minus, t_plus
        self.n_samples_ = t_minus.total
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "divergence_")
        return -self.divergence_


def _relative_from_tables(t_minus, t_plus, alpha, bias_correction):
    patterns = np.union1d(t_minus.patterns, t_plus.patterns)
    cm, gm = t_minus.aligned(patterns)
    cp, gp = t_plus.aligned(patterns)
    full = float(_relative_entropy_from_counts(cm, cp, alpha))
    loo = _relative_entropy_from_counts(cm[None] - gm, cp[None] - gp, alpha)
    value, se, reps = _jackknife(full, loo, bias_correction)
    unseen = float(cm[cp.sum(-1) == 0].sum()) / cm.sum()
    return value, se, reps, unseen


# --- sample banks -----------------------------------------------------------


def _bank_margin(depth: int) -> int:
    return depth + 8


class FieldBank:
    """Snapshots of one model shared by all windows of a computation.

    Periodic Ising models and product measures are sampled on a torus and
    every site is used.  Ising models with plus, minus or free boundaries
    are sampled on a square whose border of width ``depth + 8`` (or
    ``config.margin``) is never used as a prediction site.
    """

    def __init__(self, model, n_samples: int, depth: int = 6, config: EstimationConfig | None = None):
        config = config or EstimationConfig()
        self.model = model
        self.config = config
        self.depth = depth
        self.periodic = isinstance(model, IidModel) or model.boundary is Boundary.PERIODIC
        if self.periodic:
            self.margin = 0
            shape = config.shape or (64, 64)
        else:
            self.margin = config.margin if config.margin is not None else _bank_margin(depth)
            side = max(64, 2 * self.margin + 16)
            shape = config.shape or (side, side)
        self.shape = tuple(shape)
        H, W = self.shape
        usable = (H - 2 * self.margin) * (W - 2 * self.margin)
        if usable <= 0:
            raise ValueError("margin leaves no usable sites")
        n_snap = max(-(-n_samples // usable), config.n_groups)
        if isinstance(model, IidModel):
            self.snapshots = iid_snapshots(model, self.shape, n_snap, config.sampler.seed)
        else:
            self.snapshots = gibbs_snapshots(model, self.shape, config.sampler, n_snap)
        self.groups = _default_groups(n_snap, config.n_groups)
        self.n_samples = n_snap * usable
        self._tables: dict = {}

    @property
    def n_symbols(self) -> int:
        return self.model.n_symbols

    def estimator(self, offsets) -> ConditionalEntropyEstimator:
        """Fitted estimator for one past window (cached per window)."""
        key = tuple(tuple(int(c) for c in o) for o in offsets)
        est = self._tables.get(key)
        if est is None:
            est = ConditionalEntropyEstimator(
                offsets=key,
                n_symbols=self.n_symbols,
                pseudocount=self.config.pseudocount,
                n_groups=self.config.n_groups,
                periodic=self.periodic,
                margin=self.margin,
                bias_correction=self.config.bias_correction,
            ).fit(self.snapshots, groups=self.groups)
            self._tables[key] = est
        return est

    def describe(self) -> dict:
        return {
            "shape": list(self.shape),
            "snapshots": len(self.snapshots),
            "margin": self.margin,
            "samples": self.n_samples,
        }


def _bank_for(model, n_samples, depth, config, bank):
    if bank is not None:
        if bank.model != model:
            raise ValueError("the sample bank was drawn from a different model")
        if bank.n_samples < n_samples:
            raise InsufficientSamplesError(n_samples, bank.n_samples)
        return bank
    return FieldBank(model, n_samples, depth, config)


def _check_samples(model, depth, n_samples):
    required = 10 * model.n_symbols ** (depth + 1)
    if n_samples < required:
        raise InsufficientSamplesError(required, n_samples)


def _entropy_of(marginal) -> float:
    return -math.fsum(p * math.log(p) for p in marginal)


def _exact(value, depth, **meta) -> EntropyEstimate:
    return EntropyEstimate(float(value), 0.0, depth, 0, "exact", metadata=meta)


def _combine(estimates: Sequence[EntropyEstimate], weights: Sequence[float]):
    """Weighted sum of estimates; replicates combine linearly when all share a bank."""
    value = math.fsum(w * e.value for w, e in zip(weights, estimates))
    reps = [e.replicates for e in estimates if e.replicates is not None]
    if reps and len({len(r) for r in reps}) == 1:
        G = len(reps[0])
        total = np.zeros(G)
        for w, e in zip(weights, estimates):
            total += w * (e.replicates if e.replicates is not None else np.full(G, e.value))
        mean = total.mean()
        se = math.sqrt((G - 1) / G * float(((total - mean) ** 2).sum()))
        return value, se, total
    se = math.sqrt(math.fsum((w * e.std_error) ** 2 for w, e in zip(weights, estimates)))
    return value, se, None


# --- entropies along lines ------------------------------------------------


def conditional_entropy(
    model,
    spec: PastWindowSpec,
    n_samples: int = 100_000,
    *,
    config: EstimationConfig | None = None,
    bank: FieldBank | None = None,
) -> EntropyEstimate:
    """``H(X_0 | past window)``: exact for product measures, plug-in otherwise."""
    if isinstance(model, IidModel):
        return _exact(model.entropy, spec.depth)
    _check_samples(model, spec.depth, n_samples)
    bank = _bank_for(model, n_samples, spec.depth, config, bank)
    est = bank.estimator(past_sites(spec).sites)
    return EntropyEstimate(
        float(est.entropy_),
        float(est.std_error_),
        spec.depth,
        est.n_samples_,
        "monte_carlo",
        metadata={"window": [list(o) for o in est.offsets], "plugin": est.plugin_entropy_},
        replicates=est.replicates_,
    )


def _orbit_average(model, slope: Slope, points, depth, n_samples, config, bank, variant=Variant.LATTICE):
    ests = [
        conditional_entropy(model, PastWindowSpec(slope, t, depth, variant), n_samples, config=config, bank=bank)
        for t in points
    ]
    return ests


def _magnitude(slope: Slope) -> Slope:
    return abs(slope)


def line_entropy_rational(
    model,
    p: int,
    q: int,
    depth: int = 6,
    n_samples: int = 100_000,
    *,
    axis: Axis = Axis.X,
    config: EstimationConfig | None = None,
    bank: FieldBank | None = None,
) -> EntropyEstimate:
    """Average of the conditional entropies at the torus orbit ``{nu p / q}``.

    A negative ``p`` is replaced by ``|p|``; the entropy of a direction
    depends only on the slope magnitude.
    """
    if q <= 0 or math.gcd(abs(p), q) != 1:
        raise ValueError("p/q must be in lowest terms with q > 0")
    slope = _magnitude(Slope.rational(p, q, axis))
    if isinstance(model, IidModel):
        return _exact(model.entropy, depth, slope=str(slope))
    _check_samples(model, depth, n_samples)
    bank = _bank_for(model, n_samples, depth, config, bank)
    points = [frac(Fraction(nu * slope.p, slope.q)) for nu in range(slope.q)]
    ests = _orbit_average(model, slope, points, depth, n_samples, config, bank)
    value, se, reps = _combine(ests, [1.0 / slope.q] * slope.q)
    return EntropyEstimate(
        value,
        se,
        depth,
        bank.n_samples,
        "monte_carlo",
        metadata={"slope": str(slope), "torus_points": [str(t) for t in points], "bank": bank.describe()},
        replicates=reps,
    )


def _midpoints(M: int, lo: float = 0.0, hi: float = 1.0) -> list[float]:
    return [lo + (hi - lo) * (j + 0.5) / M for j in range(M)]


def line_entropy_irrational(
    model,
    lam: float,
    M: int = 32,
    depth: int = 6,
    n_samples: int = 100_000,
    *,
    axis: Axis = Axis.X,
    config: EstimationConfig | None = None,
    bank: FieldBank | None = None,
) -> EntropyEstimate:
    """Midpoint quadrature over ``M`` torus points of the conditional entropy."""
    if M < 1:
        raise ValueError("M must be positive")
    slope = _magnitude(Slope.irrational(lam, axis))
    meta = {"slope": str(slope), "quadrature_nodes": M, "low_accuracy": M == 1}
    if isinstance(model, IidModel):
        return EntropyEstimate(model.entropy, 0.0, depth, 0, "quadrature", M, {**meta, "quadrature_spread": 0.0})
    _check_samples(model, depth, n_samples)
    bank = _bank_for(model, n_samples, depth, config, bank)
    ests = _orbit_average(model, slope, _midpoints(M), depth, n_samples, config, bank)
    value, se, reps = _combine(ests, [1.0 / M] * M)
    node_values = np.array([e.value for e in ests])
    meta.update(
        quadrature_spread=float(node_values.std()),
        distinct_windows=len({tuple(map(tuple, e.metadata["window"])) for e in ests}),
        bank=bank.describe(),
    )
    return EntropyEstimate(value, se, depth, bank.n_samples, "quadrature", M, meta, reps)


def line_entropy(model, slope: Slope, depth=6, n_samples=100_000, M=32, *, config=None, bank=None) -> EntropyEstimate:
    """Dispatch on the rational/irrational tag of ``slope``."""
    if slope.is_rational:
        return line_entropy_rational(model, slope.p, slope.q, depth, n_samples, axis=slope.axis, config=config, bank=bank)
    return line_entropy_irrational(model, slope.real, M, depth, n_samples, axis=slope.axis, config=config, bank=bank)


def _edge_weights(poly: Polygon):
    edges = poly.edges
    total = math.fsum(e.length for e in edges)
    return edges, [e.length / total for e in edges]


def polygon_entropy(
    model, poly: Polygon, depth=6, n_samples=100_000, M=32, *, config=None, bank=None
) -> EntropyEstimate:
    """Length-weighted average of the line entropies of the edges."""
    edges, weights = _edge_weights(poly)
    if isinstance(model, IidModel):
        return _exact(model.entropy, depth, edges=len(edges))
    _check_samples(model, depth, n_samples)
    bank = _bank_for(model, n_samples, depth, config, bank)
    ests = [line_entropy(model, e.slope, depth, n_samples, M, config=config, bank=bank) for e in edges]
    value, se, reps = _combine(ests, weights)
    meta = {
        "edges": [
            {"slope": str(e.slope), "length": e.length, "value": est.value, "std_error": est.std_error}
            for e, est in zip(edges, ests)
        ],
        "bank": bank.describe(),
    }
    return EntropyEstimate(value, se, depth, bank.n_samples, "monte_carlo", metadata=meta, replicates=reps)


def curve_entropy(
    model, c: Curve, N_polygon: int = 32, depth=6, n_samples=100_000, M=32, *, config=None, bank=None
) -> EntropyEstimate:
    """Entropy along the chord polygon of ``c`` with ``N_polygon`` chords."""
    poly = polygonize(c, N_polygon)
    est = polygon_entropy(model, poly, depth, n_samples, M, config=config, bank=bank)
    meta = {**est.metadata, "polygon_deviation": polygonization_deviation(c, N_polygon), "N_polygon": N_polygon}
    return replace(est, metadata=meta)


def contour_line_entropy(
    model, lam, depth=6, n_samples=100_000, M=32, *, axis: Axis = Axis.X, config=None, bank=None
) -> EntropyEstimate:
    """Specific entropy along the contour approximation of a line.

    ``(1 / (1 + lam)) * (int_0^1 H_sharp dt + int_{1-lam}^1 H_above dt)``,
    each integral by the midpoint rule with ``M`` nodes.
    """
    slope = Slope.rational(lam, 1, axis) if isinstance(lam, (int, Fraction)) else Slope.irrational(lam, axis)
    lam_v = slope.value
    if not 0 <= lam_v <= 1:
        raise ValueError("contour entropies need 0 <= lam <= 1")
    meta = {"slope": str(slope), "quadrature_nodes": M}
    if isinstance(model, IidModel):
        return EntropyEstimate(model.entropy, 0.0, depth, 0, "quadrature", M, meta)
    _check_samples(model, depth, n_samples)
    bank = _bank_for(model, n_samples, depth, config, bank)
    sharp = _orbit_average(model, slope, _midpoints(M), depth, n_samples, config, bank, Variant.CONTOUR_SHARP)
    ests, weights = list(sharp), [1.0 / M] * M
    if lam_v > 0:
        lo = 1 - float(lam_v)
        above = _orbit_average(
            model, slope, _midpoints(M, lo, 1.0), depth, n_samples, config, bank, Variant.CONTOUR_WITH_ABOVE
        )
        ests += above
        weights += [float(lam_v) / M] * M
    scale = 1.0 / (1.0 + float(lam_v))
    value, se, reps = _combine(ests, [scale * w for w in weights])
    return EntropyEstimate(value, se, depth, bank.n_samples, "quadrature", M, {**meta, "bank": bank.describe()}, reps)


# --- relative entropies ---------------------------------------------------


def kl_divergence(p, q) -> float:
    """``sum p log(p / q)`` in nats."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def inverse_triangle_gap(nu, mu, lam) -> float:
    """``KL(nu||lam) - KL(nu||mu) - KL(mu||lam)``, nonnegative for ordered triples."""
    return kl_divergence(nu, lam) - kl_divergence(nu, mu) - kl_divergence(mu, lam)


class _BankPair:
    def __init__(self, minus: FieldBank, plus: FieldBank):
        self.minus, self.plus = minus, plus
        self._cache: dict = {}

    def relative(self, offsets):
        key = tuple(tuple(int(c) for c in o) for o in offsets)
        if key not in self._cache:
            em, ep = self.minus.estimator(key), self.plus.estimator(key)
            self._cache[key] = _relative_from_tables(
                em.table_, ep.table_, self.minus.config.pseudocount, self.minus.config.bias_correction
            )
        return self._cache[key]


def make_bank_pair(model_minus, model_plus, n_samples, depth=6, config: EstimationConfig | None = None):
    """Banks for two measures drawn from independent streams of one root seed."""
    config = config or EstimationConfig()
    s = config.sampler
    c_minus = replace(config, sampler=replace(s, seed=derive_seed(s.seed, 0)))
    c_plus = replace(config, sampler=replace(s, seed=derive_seed(s.seed, 1)))
    return _BankPair(FieldBank(model_minus, n_samples, depth, c_minus), FieldBank(model_plus, n_samples, depth, c_plus))


def _check_pair(model_minus, model_plus):
    if model_minus.n_symbols != model_plus.n_symbols:
        raise ValueError("both models need the same alphabet")


def relative_conditional_entropy(
    model_minus, model_plus, spec: PastWindowSpec, n_samples=100_000, *, config=None, banks=None
) -> EntropyEstimate:
    """Mean over the first measure of the KL divergence between conditional laws."""
    _check_pair(model_minus, model_plus)
    if isinstance(model_minus, IidModel) and isinstance(model_plus, IidModel):
        return _exact(kl_divergence(model_minus.marginal, model_plus.marginal), spec.depth)
    _check_samples(model_minus, spec.depth, n_samples)
    banks = banks or make_bank_pair(model_minus, model_plus, n_samples, spec.depth, config)
    value, se, reps, unseen = banks.relative(past_sites(spec).sites)
    return EntropyEstimate(
        value,
        se,
        spec.depth,
        banks.minus.n_samples,
        "monte_carlo",
        metadata={"unseen_reference_mass": unseen, "smoothed_reference": unseen > 0},
        replicates=reps,
    )


def relative_line_entropy(
    model_minus, model_plus, slope: Slope, depth=6, n_samples=100_000, M=32, *, config=None, banks=None
) -> EntropyEstimate:
    _check_pair(model_minus, model_plus)
    slope = _magnitude(slope)
    if isinstance(model_minus, IidModel) and isinstance(model_plus, IidModel):
        return _exact(kl_divergence(model_minus.marginal, model_plus.marginal), depth)
    _check_samples(model_minus, depth, n_samples)
    banks = banks or make_bank_pair(model_minus, model_plus, n_samples, depth, config)
    if slope.is_rational:
        points = [frac(Fraction(nu * slope.p, slope.q)) for nu in range(slope.q)]
        method, grid = "monte_carlo", None
    else:
        points, method, grid = _midpoints(M), "quadrature", M
    ests = [
        relative_conditional_entropy(
            model_minus, model_plus, PastWindowSpec(slope, t, depth), n_samples, config=config, banks=banks
        )
        for t in points
    ]
    value, se, reps = _combine(ests, [1.0 / len(points)] * len(points))
    unseen = max(e.metadata["unseen_reference_mass"] for e in ests)
    return EntropyEstimate(
        value, se, depth, banks.minus.n_samples, method, grid, {"unseen_reference_mass": unseen}, reps
    )


def relative_polygon_entropy(
    model_minus, model_plus, poly: Polygon, depth=6, n_samples=100_000, M=32, *, config=None, banks=None
) -> EntropyEstimate:
    edges, weights = _edge_weights(poly)
    _check_pair(model_minus, model_plus)
    if isinstance(model_minus, IidModel) and isinstance(model_plus, IidModel):
        return _exact(kl_divergence(model_minus.marginal, model_plus.marginal), depth)
    _check_samples(model_minus, depth, n_samples)
    banks = banks or make_bank_pair(model_minus, model_plus, n_samples, depth, config)
    ests = [
        relative_line_entropy(model_minus, model_plus, e.slope, depth, n_samples, M, config=config, banks=banks)
        for e in edges
    ]
    value, se, reps = _combine(ests, weights)
    meta = {"edges": [{"slope": str(e.slope), "length": e.length, "value": x.value} for e, x in zip(edges, ests)]}
    return EntropyEstimate(value, se, depth, banks.minus.n_samples, "monte_carlo", metadata=meta, replicates=reps)


def relative_entropy_curve(
    model_minus, model_plus, c: Curve, N_polygon=32, depth=6, n_samples=100_000, M=32, *, config=None, banks=None
) -> EntropyEstimate:
    poly = polygonize(c, N_polygon)
    est = relative_polygon_entropy(model_minus, model_plus, poly, depth, n_samples, M, config=config, banks=banks)
    meta = {**est.metadata, "polygon_deviation": polygonization_deviation(c, N_polygon), "N_polygon": N_polygon}
    return replace(est, metadata=meta)


def fo_specific_entropy(
    model_minus, model_plus, depth=6, n_samples=100_000, *, config=None, banks=None
) -> EntropyEstimate:
    """Average of the relative entropies for horizontal and vertical half-line pasts."""
    _check_pair(model_minus, model_plus)
    if isinstance(model_minus, IidModel) and isinstance(model_plus, IidModel):
        return _exact(kl_divergence(model_minus.marginal, model_plus.marginal), depth)
    _check_samples(model_minus, depth, n_samples)
    banks = banks or make_bank_pair(model_minus, model_plus, n_samples, depth, config)
    ests = [
        relative_conditional_entropy(
            model_minus, model_plus, PastWindowSpec(Slope.rational(0, 1, axis), 0, depth), n_samples, banks=banks
        )
        for axis in (Axis.X, Axis.Y)
    ]
    value, se, reps = _combine(ests, [0.5, 0.5])
    meta = {"horizontal": ests[0].value, "vertical": ests[1].value}
    return EntropyEstimate(value, se, depth, banks.minus.n_samples, "monte_carlo", metadata=meta, replicates=reps)


# --- Shannon-McMillan along lines ------------------------------------------


class ExactIidConditionals:
    """Conditional laws of a product measure: the past is irrelevant."""

    def __init__(self, model: IidModel):
        self.model = model
        self._logp = np.log(np.asarray(model.marginal))

    def information(self, offsets, origin, patterns) -> np.ndarray:
        return -self._logp[np.asarray(origin)]


class PluginConditionals:
    """Plug-in conditional laws from the tables of a :class:`FieldBank`."""

    def __init__(self, bank: FieldBank):
        self.bank = bank

    def information(self, offsets, origin, patterns) -> np.ndarray:
        origin = np.asarray(origin, np.int64)
        if len(offsets) == 0:
            est = self.bank.estimator(())
            probs = est.table_.conditional(np.zeros(len(origin), np.int64))
        else:
            est = self.bank.estimator(offsets)
            probs = est.table_.conditional(_encode(patterns, self.bank.n_symbols))
        return -np.log(probs[np.arange(len(origin)), origin])


def line_sites(line: LinearMap, n: int) -> np.ndarray:
    """Sites ``L(0), ..., L(n)`` built from skew-product offsets, shape ``(n+1, 2)``."""
    slope = line.slope
    if not 0 <= slope.value <= 1:
        raise ValueError("lines need a slope in [0, 1]")
    a0 = frac(line.intercept)
    base = math.floor(line.intercept)
    unit = LinearMap(slope, a0)
    sites = np.array([skew_offset(unit, i) for i in range(n + 1)], dtype=np.int64)
    shift = (0, base) if slope.axis is Axis.X else (base, 0)
    return sites + np.array(shift, dtype=np.int64)


def _shifted_mean(terms: np.ndarray) -> float:
    x0 = float(terms[0])
    return x0 + math.fsum((terms - x0).tolist()) / len(terms)


def rescaled_information(field_, line: LinearMap, n: int, estimator, depth: int = 6, *, sites=None) -> float:
    """``-(n+1)^-1 log P(field on L(0..n))`` as a sum of one-site conditionals.

    Term ``i`` predicts site ``L(i)`` from the ``min(i, depth)`` preceding
    sites of the line; their offsets ``L(i-j) - L(i)`` are the past window at
    torus point ``{a + i lam}``.
    """
    if sites is None:
        sites = line_sites(line, n)
    vals = np.asarray(field_.at(sites), np.int64)
    terms = np.empty(n + 1)
    # offsets rows for every i, padded with a sentinel where i < depth
    d = depth
    idx = np.arange(n + 1)
    offs = np.full((n + 1, 2 * d), np.iinfo(np.int64).min, dtype=np.int64)
    for j in range(1, d + 1):
        ok = idx >= j
        offs[ok, 2 * j - 2 : 2 * j] = sites[idx[ok] - j] - sites[idx[ok]]
    keys, inverse = np.unique(offs, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for k, key in enumerate(keys):
        rows = np.nonzero(inverse == k)[0]
        depth_k = int(np.count_nonzero(key != np.iinfo(np.int64).min)) // 2
        offsets = tuple((int(key[2 * j]), int(key[2 * j + 1])) for j in range(depth_k))
        patterns = np.stack([vals[rows - j] for j in range(1, depth_k + 1)], axis=1) if depth_k else None
        terms[rows] = estimator.information(offsets, vals[rows], patterns)
    return _shifted_mean(terms)


class _LazyIidField:
    """Independent symbols drawn on demand at the requested sites."""

    def __init__(self, model: IidModel, seed: int):
        self.model = model
        self.rng = np.random.default_rng(seed)

    def at(self, sites):
        return self.rng.choice(self.model.n_symbols, size=len(sites), p=np.asarray(self.model.marginal))


class _TorusField:
    def __init__(self, values):
        self.values = values

    def at(self, sites):
        H, W = self.values.shape
        x, y = sites[:, 0], sites[:, 1]
        return self.values[y % H, x % W]


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    mean: float
    spread: float
    std_error: float
    n_fields: int
    baseline_mean: float | None = None
    baseline_spread: float | None = None


def _lex_past(r: int):
    return [(dx, dy) for dx in range(-r, r + 1) for dy in range(-r, r + 1) if dx < 0 or (dx == 0 and dy < 0)]


def _volume_information(values: np.ndarray, side: int, estimator, r: int = 1) -> float:
    """Volume-order rescaled information over a ``side x side`` box, lexicographic past."""
    past = _lex_past(r)
    xs, ys = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    xs, ys = xs.ravel(), ys.ravel()
    avail = np.stack([(0 <= xs + dx) & (xs + dx < side) & (0 <= ys + dy) & (ys + dy < side) for dx, dy in past], 1)
    # lexicographic predecessors only: all offsets in ``past`` precede the origin
    keys, inverse = np.unique(avail, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    terms = np.empty(len(xs))
    origin = values[ys, xs].astype(np.int64)
    for k, key in enumerate(keys):
        rows = np.nonzero(inverse == k)[0]
        offsets = tuple(p for p, ok in zip(past, key) if ok)
        pats = np.stack([values[ys[rows] + dy, xs[rows] + dx] for dx, dy in offsets], 1) if offsets else None
        terms[rows] = estimator.information(offsets, origin[rows], pats)
    return _shifted_mean(terms)


def convergence_experiment(
    model,
    line: LinearMap,
    n_list: Sequence[int],
    depth: int = 6,
    n_samples: int = 100_000,
    *,
    n_fields: int = 20,
    config: EstimationConfig | None = None,
    bank: FieldBank | None = None,
    baseline: bool = False,
    strip_height: int = 64,
    seed: int | None = None,
) -> list[ConvergenceRow]:
    """Rescaled information along ``line`` over fresh fields for each ``n``.

    Periodic Ising fields are sampled on a ``(n + 1 + 2 depth + 8)`` by
    ``strip_height`` torus that the line wraps around vertically; product
    measures are drawn lazily at the line's sites only.  With ``baseline``
    the volume-order information over a box of about ``n + 1`` sites with a
    lexicographic past is reported alongside.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])) or not n_list or n_list[0] < 1:
        raise ValueError("n_list must be positive and increasing")
    config = config or EstimationConfig()
    seed = config.sampler.seed if seed is None else seed
    slope = line.slope
    if isinstance(model, IidModel):
        estimator = ExactIidConditionals(model)
    else:
        if model.boundary is not Boundary.PERIODIC:
            raise ValueError("convergence experiments sample periodic strips; use a periodic Ising model")
        _check_samples(model, depth, n_samples)
        estimator = PluginConditionals(_bank_for(model, n_samples, depth, config, bank))
    rows = []
    for k, n in enumerate(n_list):
        sites = line_sites(line, n)
        values, base_vals = [], []
        side = max(1, round((math.sqrt(n + 1) - 1) / 2)) * 2 + 1
        if isinstance(model, IidModel):
            for f in range(n_fields):
                fld = _LazyIidField(model, derive_seed(seed, 2, k, f))
                values.append(rescaled_information(fld, line, n, estimator, depth, sites=sites))
                if baseline:
                    rng = np.random.default_rng(derive_seed(seed, 3, k, f))
                    box = rng.choice(model.n_symbols, size=(side, side), p=np.asarray(model.marginal))
                    base_vals.append(_volume_information(box, side, estimator))
        else:
            long = n + 1 + 2 * depth + 8
            shape = (strip_height, long) if slope.axis is Axis.X else (long, strip_height)
            s = config.sampler
            cfg = replace(s, seed=derive_seed(seed, 2, k), replicas=1)
            snaps = gibbs_snapshots(model, shape, cfg, n_fields)
            for f in range(n_fields):
                values.append(rescaled_information(_TorusField(snaps[f]), line, n, estimator, depth, sites=sites))
            if baseline:
                bshape = (side + 16, side + 16)
                bsnaps = gibbs_snapshots(model, bshape, replace(cfg, seed=derive_seed(seed, 3, k)), n_fields)
                for f in range(n_fields):
                    base_vals.append(_volume_information(bsnaps[f][8:-8, 8:-8], side, estimator))
        v = np.array(values)
        x0 = float(v[0])
        mean = x0 + math.fsum((v - x0).tolist()) / len(v)
        spread = float(np.sqrt(np.mean((v - mean) ** 2)))
        se = spread / math.sqrt(len(v) - 1) if len(v) > 1 else 0.0
        bm = bs = None
        if baseline:
            b = np.array(base_vals)
            bm, bs = float(b.mean()), float(b.std())
        rows.append(ConvergenceRow(n, mean, spread, se, n_fields, bm, bs))
    return rows


# --- exact small-window oracles -------------------------------------------


def exact_window_conditional_entropy(model: IsingModel, shape, origin, past) -> float:
    """``H(X_origin | X_past)`` from the exact Gibbs law of a small window."""
    states, probs = exact_joint(model, shape)
    flat = states.reshape(len(states), -1)
    H, W = shape

    def col(site):
        x, y = site
        if not (0 <= x < W and 0 <= y < H):
            raise ValueError("site outside the window")
        return flat[:, y * W + x].astype(np.int64)

    codes = np.zeros(len(states), np.int64)
    for j, s in enumerate(past):
        codes += col(s) << j
    x0 = col(origin)
    joint = np.zeros((2 ** len(past), 2))
    np.add.at(joint, (codes, x0), probs)
    marg = joint.sum(1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(joint > 0, joint / marg, 1.0)
    return float(-(joint * np.log(cond)).sum())
