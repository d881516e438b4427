"""Stationary random fields on Z^2: product measures and the Ising model.

Ising samples come from heat-bath (Glauber) sweeps in raster order.  All
randomness is drawn from numpy's PCG64 generator; replica ``r`` of a run with
seed ``s`` uses the stream seeded by ``s + r``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import _kernels

__all__ = [
    "RNG_NAME",
    "Alphabet",
    "Boundary",
    "IidModel",
    "IsingModel",
    "SamplerConfig",
    "Window",
    "Configuration",
    "sample_iid",
    "local_conditional",
    "sample_gibbs",
    "gibbs_snapshots",
    "exact_pattern_probability",
    "exact_joint",
    "derive_seed",
    "conditional_lower_bound",
]

RNG_NAME = "numpy PCG64"
_DIGITS = "0123456789abcdef"
MAX_EXACT_SITES = 20


def derive_seed(root: int, *keys: int) -> int:
    """Deterministic 63-bit child seed of ``root`` for the integer path ``keys``."""
    ss = np.random.SeedSequence([int(root) & (2**64 - 1), *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class Alphabet:
    """Ordered single-character symbol labels, minimal first."""

    symbols: tuple[str, ...] = ("-", "+")

    def __post_init__(self):
        syms = tuple(self.symbols)
        object.__setattr__(self, "symbols", syms)
        if not 2 <= len(syms) <= 16:
            raise ValueError("alphabets have between 2 and 16 symbols")
        if len(set(syms)) != len(syms):
            raise ValueError("symbols must be distinct")
        if any(len(s) != 1 or s.isspace() for s in syms):
            raise ValueError("symbols must be single printable characters")

    @classmethod
    def of_size(cls, k: int) -> "Alphabet":
        if k == 2:
            return cls()
        return cls(("-",) + tuple(_DIGITS[1 : k - 1]) + ("+",))

    def __len__(self):
        return len(self.symbols)

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < len(self):
                raise ValueError(f"symbol index {label} out of range")
            return int(label)
        return self.symbols.index(label)


class Boundary(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    FREE = "free"
    PERIODIC = "periodic"


_BOUNDARY_CODE = {
    Boundary.PERIODIC: _kernels.PERIODIC,
    Boundary.PLUS: _kernels.PLUS,
    Boundary.MINUS: _kernels.MINUS,
    Boundary.FREE: _kernels.FREE,
}


@dataclass(frozen=True)
class IidModel:
    """Product measure with the given single-site marginal."""

    marginal: tuple[float, ...]
    alphabet: Alphabet | None = None

    def __post_init__(self):
        m = tuple(float(p) for p in self.marginal)
        object.__setattr__(self, "marginal", m)
        if self.alphabet is None:
            object.__setattr__(self, "alphabet", Alphabet.of_size(len(m)))
        if len(m) != len(self.alphabet):
            raise ValueError("marginal and alphabet sizes differ")
        if any(not p > 0 for p in m):
            raise ValueError("marginal entries must be strictly positive")
        if abs(math.fsum(m) - 1) > 1e-12:
            raise ValueError("marginal must sum to 1")

    @property
    def n_symbols(self) -> int:
        return len(self.marginal)

    @property
    def entropy(self) -> float:
        return -math.fsum(p * math.log(p) for p in self.marginal)

    def describe(self) -> dict:
        return {"kind": "iid", "marginal": list(self.marginal), "alphabet": "".join(self.alphabet.symbols)}


@dataclass(frozen=True)
class IsingModel:
    """Nearest-neighbour ferromagnet ``beta * sum s_i s_j + h * sum s_i``."""

    beta: float
    external_field: float = 0.0
    boundary: Boundary = Boundary.PERIODIC
    alphabet: Alphabet = field(default_factory=Alphabet)

    def __post_init__(self):
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "external_field", float(self.external_field))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be a finite nonnegative number")
        if not math.isfinite(self.external_field):
            raise ValueError("external field must be finite")
        if len(self.alphabet) != 2:
            raise ValueError("the Ising model needs a binary alphabet")

    @property
    def n_symbols(self) -> int:
        return 2

    def with_boundary(self, boundary) -> "IsingModel":
        return IsingModel(self.beta, self.external_field, Boundary(boundary), self.alphabet)

    def p_plus_table(self) -> np.ndarray:
        """P(+) for neighbour sums -4..4."""
        s = np.arange(-4, 5)
        return 1.0 / (1.0 + np.exp(-2.0 * (self.beta * s + self.external_field)))

    def describe(self) -> dict:
        return {
            "kind": "ising",
            "beta": self.beta,
            "external_field": self.external_field,
            "boundary": self.boundary.value,
        }


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    burn_in_sweeps: int = 1000
    thinning_sweeps: int = 10
    replicas: int = 1

    def __post_init__(self):
        if self.burn_in_sweeps < 0:
            raise ValueError("burn_in_sweeps must be >= 0")
        if self.thinning_sweeps < 1:
            raise ValueError("thinning_sweeps must be >= 1")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def describe(self) -> dict:
        return {
            "seed": self.seed,
            "burn_in_sweeps": self.burn_in_sweeps,
            "thinning_sweeps": self.thinning_sweeps,
            "replicas": self.replicas,
            "rng": RNG_NAME,
        }


@dataclass(frozen=True)
class Window:
    """The rectangle ``[x0, x0 + width) x [y0, y0 + height)``."""

    width: int
    height: int
    x0: int = 0
    y0: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("window must be non-empty")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height


class Configuration:
    """Immutable symbol indices over a window; ``values[y - y0, x - x0]``."""

    __slots__ = ("window", "values", "alphabet", "periodic")

    def __init__(self, window: Window, values, alphabet: Alphabet | None = None, periodic: bool = False):
        arr = np.array(values, dtype=np.int8)
        if arr.shape != window.shape:
            raise ValueError(f"values have shape {arr.shape}, window needs {window.shape}")
        alphabet = alphabet or Alphabet()
        if arr.size and (arr.min() < 0 or arr.max() >= len(alphabet)):
            raise ValueError("symbol index out of range")
        arr.flags.writeable = False
        self.window = window
        self.values = arr
        self.alphabet = alphabet
        self.periodic = periodic

    def at(self, sites) -> np.ndarray:
        """Symbol indices at absolute sites ``(N, 2)``; wraps if periodic."""
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
        x = sites[:, 0] - self.window.x0
        y = sites[:, 1] - self.window.y0
        if self.periodic:
            x, y = x % self.window.width, y % self.window.height
        elif x.size and (x.min() < 0 or y.min() < 0 or x.max() >= self.window.width or y.max() >= self.window.height):
            raise IndexError("site outside the window")
        return self.values[y, x]

    def rows(self) -> list[str]:
        lut = np.array(self.alphabet.symbols)
        return ["".join(lut[row]) for row in self.values]

    def magnetization(self) -> float:
        spins = 2.0 * self.values / (len(self.alphabet) - 1) - 1.0
        return float(spins.mean())

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.window == other.window
            and self.alphabet == other.alphabet
            and self.periodic == other.periodic
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"Configuration({self.window}, periodic={self.periodic})"


def sample_iid(model: IidModel, window: Window, cfg: SamplerConfig = SamplerConfig()) -> Configuration:
    rng = np.random.default_rng(cfg.seed)
    values = rng.choice(model.n_symbols, size=window.shape, p=np.asarray(model.marginal))
    return Configuration(window, values, model.alphabet)


def iid_snapshots(model: IidModel, shape: tuple[int, int], n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice(model.n_symbols, size=(n, *shape), p=np.asarray(model.marginal)).astype(np.int8)


def _spin_sum(model: IsingModel, neighbors) -> float:
    total = 0
    for nb in neighbors:
        if nb is None:
            if model.boundary is not Boundary.FREE:
                raise ValueError("absent neighbours only occur with free boundaries")
            continue
        total += 2 * model.alphabet.index(nb) - 1
    return total


def local_conditional(model: IsingModel, neighbors: Sequence) -> np.ndarray:
    """Heat-bath law ``(P(-), P(+))`` of a site given its four neighbours.

    Neighbours are symbol labels or indices; ``None`` marks an absent
    neighbour under a free boundary.
    """
    if not isinstance(model, IsingModel):
        raise TypeError("local conditionals are defined for Ising models")
    if len(neighbors) != 4:
        raise ValueError("a site has four neighbours")
    field_ = model.beta * _spin_sum(model, neighbors) + model.external_field
    p_plus = 1.0 / (1.0 + math.exp(-2.0 * field_))
    return np.array([1.0 - p_plus, p_plus])


def conditional_lower_bound(model: IsingModel) -> float:
    """A positive lower bound on every entry of :func:`local_conditional`."""
    return math.exp(-8.0 * model.beta - 2.0 * abs(model.external_field)) / 2.0


def _initial_spins(model: IsingModel, shape, rng) -> np.ndarray:
    if model.boundary is Boundary.PLUS:
        return np.ones(shape, dtype=np.int8)
    if model.boundary is Boundary.MINUS:
        return -np.ones(shape, dtype=np.int8)
    return np.where(rng.random(shape) < 0.5, 1, -1).astype(np.int8)


_CHUNK = 1 << 21


def _run_sweeps(spins, rng, n_sweeps, p_plus, code):
    H, W = spins.shape
    per_chunk = max(1, _CHUNK // (H * W))
    done = 0
    while done < n_sweeps:
        k = min(per_chunk, n_sweeps - done)
        _kernels.heat_bath_sweeps(spins, rng.random((k, H, W)), p_plus, code)
        done += k


def _chain(model: IsingModel, shape, seed: int, burn_in: int, thinning: int) -> Iterator[np.ndarray]:
    rng = np.random.default_rng(seed)
    spins = _initial_spins(model, shape, rng)
    p_plus = model.p_plus_table()
    code = _BOUNDARY_CODE[model.boundary]
    _run_sweeps(spins, rng, burn_in, p_plus, code)
    while True:
        _run_sweeps(spins, rng, thinning, p_plus, code)
        yield ((spins + 1) // 2).astype(np.int8)


def sample_gibbs(
    model: IsingModel, window: Window, cfg: SamplerConfig = SamplerConfig(), n_samples: int = 1
) -> Iterator[Configuration]:
    """Yield ``n_samples`` thinned snapshots from each of ``cfg.replicas`` chains.

    Replicas run one after another; replica ``r`` is seeded with ``cfg.seed + r``.
    """
    if not isinstance(model, IsingModel):
        raise TypeError("sample_gibbs needs an Ising model")
    periodic = model.boundary is Boundary.PERIODIC
    for r in range(cfg.replicas):
        chain = _chain(model, window.shape, cfg.seed + r, cfg.burn_in_sweeps, cfg.thinning_sweeps)
        for _ in range(n_samples):
            yield Configuration(window, next(chain), model.alphabet, periodic)


def gibbs_snapshots(model: IsingModel, shape: tuple[int, int], cfg: SamplerConfig, n: int) -> np.ndarray:
    """``n`` snapshots as one ``(n, H, W)`` array, split evenly over the replicas."""
    out = np.empty((n, *shape), dtype=np.int8)
    per = -(-n // cfg.replicas)
    i = 0
    for r in range(cfg.replicas):
        chain = _chain(model, shape, cfg.seed + r, cfg.burn_in_sweeps, cfg.thinning_sweeps)
        for _ in range(min(per, n - i)):
            out[i] = next(chain)
            i += 1
    return out


def exact_pattern_probability(model: IidModel, pattern) -> float:
    """Probability of a finite pattern under a product measure.

    ``pattern`` is a mapping from sites to symbols or a plain sequence of
    symbols (labels or indices).
    """
    if not isinstance(model, IidModel):
        raise TypeError("exact pattern probabilities need an iid model")
    symbols = pattern.values() if isinstance(pattern, Mapping) else pattern
    return math.prod(model.marginal[model.alphabet.index(s)] for s in symbols)


def exact_joint(model: IsingModel, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """All configurations of a small window and their Gibbs probabilities.

    Returns ``(states, probs)`` with ``states`` of shape ``(2**N, H, W)``
    holding symbol indices.
    """
    H, W = shape
    N = H * W
    if N > MAX_EXACT_SITES:
        raise ValueError(f"exact enumeration is limited to {MAX_EXACT_SITES} sites")
    codes = np.arange(2**N, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(N)) & 1).astype(np.int8)
    states = bits.reshape(-1, H, W)
    s = 2.0 * states - 1.0
    if model.boundary is Boundary.PERIODIC:
        bonds = (s * np.roll(s, -1, axis=2)).sum(axis=(1, 2)) + (s * np.roll(s, -1, axis=1)).sum(axis=(1, 2))
        ext = 0.0
    else:
        bonds = (s[:, :, :-1] * s[:, :, 1:]).sum(axis=(1, 2)) + (s[:, :-1, :] * s[:, 1:, :]).sum(axis=(1, 2))
        outside = {Boundary.PLUS: 1.0, Boundary.MINUS: -1.0, Boundary.FREE: 0.0}[model.boundary]
        edge = s[:, 0, :].sum(1) + s[:, -1, :].sum(1) + s[:, :, 0].sum(1) + s[:, :, -1].sum(1)
        ext = outside * edge
    log_w = model.beta * (bonds + ext) + model.external_field * s.sum(axis=(1, 2))
    log_w -= log_w.max()
    w = np.exp(log_w)
    return states, w / w.sum()
