"""Dormancy-rate measures: derived quantities, kernel, offset and binning.

A measure is either a finite list of atoms ``(rate, mass)`` or a scaled Gamma
law.  Gamma measures use the *scale* parametrisation throughout, so the first
moment is ``mass * shape * scale`` and the dormancy-time CDF is
``1 - (1 + scale * t) ** -shape``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate, special

from .exceptions import DegenerateGridError, InvalidMeasureError
from .rng import Purpose, as_stream

QUAD_EPSABS = 1e-10


@dataclass(frozen=True)
class SeedBankMeasure:
    kind: str
    atoms: tuple = ()
    shape: float = 0.0
    scale: float = 0.0
    mass: float = 0.0

    def __post_init__(self):
        if self.kind == "discrete":
            atoms = tuple((float(r), float(m)) for r, m in self.atoms)
            if not atoms:
                raise InvalidMeasureError("discrete measure needs at least one atom")
            for rate, mass in atoms:
                if not (rate > 0.0 and math.isfinite(rate)):
                    raise InvalidMeasureError(f"atom rate must be positive and finite, got {rate}")
                if not (mass > 0.0 and math.isfinite(mass)):
                    raise InvalidMeasureError(f"atom mass must be positive and finite, got {mass}")
            rates = [r for r, _ in atoms]
            if len(set(rates)) != len(rates):
                raise InvalidMeasureError("atom rates must be pairwise distinct")
            object.__setattr__(self, "atoms", tuple(sorted(atoms)))
        elif self.kind == "gamma":
            for name in ("shape", "scale", "mass"):
                v = getattr(self, name)
                if not (v > 0.0 and math.isfinite(v)):
                    raise InvalidMeasureError(f"gamma {name} must be positive and finite, got {v}")
        else:
            raise InvalidMeasureError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def discrete(cls, atoms: Sequence[Sequence[float]]) -> "SeedBankMeasure":
        return cls("discrete", tuple(tuple(a) for a in atoms))

    @classmethod
    def gamma(cls, shape: float, scale: float, mass: float = 1.0) -> "SeedBankMeasure":
        return cls("gamma", (), float(shape), float(scale), float(mass))

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for r, _ in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms])

    @property
    def total_mass(self) -> float:
        if self.kind == "discrete":
            return math.fsum(m for _, m in self.atoms)
        return self.mass

    def as_discretized(self) -> "DiscretizedMeasure":
        """The atoms of a discrete measure, viewed as a (lossless) discretization."""
        if self.kind != "discrete":
            raise InvalidMeasureError("only discrete measures convert without binning")
        return DiscretizedMeasure(self.atoms, tail_cutoff=self.atoms[-1][0])

    def cdf(self, lam):
        """mu((0, lam])."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "discrete":
            return np.sum(self.masses * (self.rates[:, None] <= lam.ravel()), axis=0).reshape(lam.shape)
        return self.mass * special.gammainc(self.shape, np.maximum(lam, 0.0) / self.scale)


@dataclass(frozen=True)
class DiscretizedMeasure:
    """Finitely many seed-banks ``(rate, mass)``, sorted by rate.

    ``tail_mass`` and ``tail_first_moment`` record what the binning cut off
    above ``tail_cutoff``.
    """

    atoms: tuple
    tail_cutoff: float = math.inf
    tail_mass: float = 0.0
    tail_first_moment: float = 0.0
    _rates: np.ndarray = field(init=False, repr=False, compare=False)
    _masses: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple((float(r), float(m)) for r, m in self.atoms)
        for rate, mass in atoms:
            if not rate > 0.0 or not mass >= 0.0:
                raise InvalidMeasureError(f"invalid atom ({rate}, {mass})")
        rates = [r for r, _ in atoms]
        if rates != sorted(set(rates)):
            raise InvalidMeasureError("atom rates must be strictly increasing")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_rates", np.array(rates, dtype=float))
        object.__setattr__(self, "_masses", np.array([m for _, m in atoms], dtype=float))

    @classmethod
    def from_atoms(cls, atoms) -> "DiscretizedMeasure":
        atoms = sorted((float(r), float(m)) for r, m in atoms)
        return cls(tuple(atoms), tail_cutoff=atoms[-1][0] if atoms else 0.0)

    @property
    def rates(self) -> np.ndarray:
        return self._rates

    @property
    def masses(self) -> np.ndarray:
        return self._masses

    @property
    def total_mass(self) -> float:
        return math.fsum(self._masses)

    def __len__(self):
        return len(self.atoms)

    def index_of(self, rate: float) -> int:
        """Position of the atom whose rate equals ``rate`` exactly, or -1."""
        i = int(np.searchsorted(self._rates, rate))
        if i < len(self._rates) and self._rates[i] == rate:
            return i
        return -1


def moments(mu) -> tuple[float, float]:
    """Total mass and first moment of a measure."""
    if isinstance(mu, DiscretizedMeasure):
        return mu.total_mass, math.fsum(mu.rates * mu.masses)
    if mu.kind == "discrete":
        return mu.total_mass, math.fsum(r * m for r, m in mu.atoms)
    return mu.mass, mu.mass * mu.shape * mu.scale


def kernel_cdf(mu, t):
    """Dormancy-time CDF, the mixture of exponential CDFs under mu / c."""
    t = np.asarray(t, dtype=float)
    if isinstance(mu, DiscretizedMeasure) or mu.kind == "discrete":
        rates, masses = mu.rates, mu.masses
        c = masses.sum()
        if c == 0.0:
            return np.zeros_like(t)
        # the weighted sum can land an ulp above 1 for large t
        out = np.minimum(-np.expm1(-np.multiply.outer(t, rates)) @ masses / c, 1.0)
    else:
        out = -np.expm1(-mu.shape * np.log1p(mu.scale * t))
    return out if out.ndim else float(out)


def _y_on_atoms(mu, y) -> np.ndarray:
    rates = mu.rates
    if callable(y):
        return np.array([float(y(r)) for r in rates])
    if isinstance(y, Mapping):
        return np.array([float(y[r]) for r in rates])
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 0:
        return np.full(len(rates), float(arr))
    if arr.shape != rates.shape:
        raise InvalidMeasureError(f"y has {arr.size} entries for {rates.size} atoms")
    return arr


def initial_offset(mu, x: float, y, t):
    """Contribution of the initial state to the active frequency at time t.

    ``y`` may be a scalar (constant in the rate), a per-atom sequence, a mapping
    from rate to value, or a callable of the rate.
    """
    t = np.asarray(t, dtype=float)
    if isinstance(mu, DiscretizedMeasure) or mu.kind == "discrete":
        rates, masses = mu.rates, mu.masses
        weights = _y_on_atoms(mu, y) * masses / rates
        out = x + (-np.expm1(-np.multiply.outer(t, rates))) @ weights
        return out if out.ndim else float(out)
    a, b, c = mu.shape, mu.scale, mu.mass
    if not callable(y) and np.ndim(y) == 0:
        if a == 1.0:
            integral = np.log1p(b * t) / b
        else:
            integral = -np.expm1((1.0 - a) * np.log1p(b * t)) / (b * (a - 1.0))
        out = x + float(y) * c * integral
        return out if out.ndim else float(out)
    if not callable(y):
        raise InvalidMeasureError("a gamma measure needs y as a scalar or a callable of the rate")
    density = lambda lam: c * np.exp(
        (a - 1.0) * np.log(lam) - lam / b - special.gammaln(a) - a * np.log(b)
    )

    def one(tt):
        if tt == 0.0:
            return x
        f = lambda lam: y(lam) * -math.expm1(-lam * tt) / lam * density(lam)
        val, _ = integrate.quad(f, 0.0, np.inf, epsabs=QUAD_EPSABS, limit=200)
        return x + val

    out = np.vectorize(one, otypes=[float])(t)
    return out if out.ndim else float(out)


def discretize(mu: SeedBankMeasure, n_bins: int, cutoff: float) -> DiscretizedMeasure:
    """Bin mu on the uniform grid ``i * cutoff / n_bins``.

    Bins are ``(lam_{i-1}, lam_i]`` with the representative rate at the right
    endpoint and mass ``mu(bin)``.  Empty bins are dropped.
    """
    n_bins = int(n_bins)
    if n_bins < 1:
        raise DegenerateGridError(f"n_bins must be >= 1, got {n_bins}")
    cutoff = float(cutoff)
    if not (cutoff > 0.0 and math.isfinite(cutoff)) or cutoff / n_bins == 0.0:
        raise DegenerateGridError(f"bin width cutoff/n_bins must be positive, got {cutoff}/{n_bins}")
    grid = np.array([i * cutoff / n_bins for i in range(1, n_bins + 1)])
    bin_mass = np.zeros(n_bins)

    if mu.kind == "discrete":
        tail_mass = tail_fm = 0.0
        for rate, mass in mu.atoms:
            i = int(np.searchsorted(grid, rate, side="left"))
            if i < n_bins:
                bin_mass[i] += mass
            else:
                tail_mass += mass
                tail_fm += rate * mass
    else:
        a, b, c = mu.shape, mu.scale, mu.mass
        log_norm = special.gammaln(a) + a * math.log(b)
        density = lambda lam: c * math.exp((a - 1.0) * math.log(lam) - lam / b - log_norm) if lam > 0 else 0.0
        lo = 0.0
        for i, hi in enumerate(grid):
            bin_mass[i], _ = integrate.quad(density, lo, hi, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200)
            lo = hi
        tail_mass = c * special.gammaincc(a, cutoff / b)
        tail_fm = c * a * b * special.gammaincc(a + 1.0, cutoff / b)

    atoms = tuple((float(g), float(m)) for g, m in zip(grid, bin_mass) if m > 0.0)
    return DiscretizedMeasure(atoms, tail_cutoff=float(grid[-1]), tail_mass=float(tail_mass),
                              tail_first_moment=float(tail_fm))


def sample_rate(mu, rng=None) -> float:
    """Draw a rate from the normalised measure mu / c."""
    stream = as_stream(rng, Purpose.RATE)
    if isinstance(mu, DiscretizedMeasure) or mu.kind == "discrete":
        return float(mu.rates[stream.choice(mu.masses)])
    return float(special.gammaincinv(mu.shape, stream.uniform()) * mu.scale)


def sample_rates(mu, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF rates of mu / c at the uniforms ``u`` (vectorised)."""
    u = np.asarray(u, dtype=float)
    if isinstance(mu, DiscretizedMeasure) or mu.kind == "discrete":
        cum = np.cumsum(mu.masses)
        idx = np.searchsorted(cum, u * cum[-1], side="right")
        return mu.rates[np.minimum(idx, len(cum) - 1)]
    return special.gammaincinv(mu.shape, u) * mu.scale

