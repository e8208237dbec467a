"""Monte Carlo estimates of both sides of the moment duality and their comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dual import DualState, _y_at, block_count_ensemble, simulate_dual
from .exceptions import FlagMismatchError, ZeroVarianceError
from .forward import DiffusionState, simulate_ensemble
from .measure import DiscretizedMeasure
from .rng import Purpose, Stream

Z_THRESHOLD = 3.0


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    se: float
    reps: int

    def __post_init__(self):
        if not self.se >= 0.0:
            raise ValueError(f"standard error must be non-negative, got {self.se}")
        if self.reps < 2:
            raise ValueError(f"an estimate needs at least 2 replicates, got {self.reps}")

    @classmethod
    def from_samples(cls, samples) -> "MomentEstimate":
        samples = np.asarray(samples, dtype=float)
        reps = samples.size
        return cls(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(reps)), reps)

    def as_dict(self) -> dict:
        return {"value": self.value, "se": self.se, "reps": self.reps}


def dual_function(x: float, y, s: DualState) -> float:
    """``x^n * prod y(lam)^m(lam)`` with ``0^0 = 1``."""
    out = float(x) ** s.n
    for rate, k in s.m:
        out *= _y_at(y, rate) ** k
    return out


def _aligned_exponents(s: DualState, mu_n: DiscretizedMeasure) -> np.ndarray:
    m = np.zeros(len(mu_n), dtype=np.int64)
    for rate, k in s.m:
        i = mu_n.index_of(rate)
        if i < 0:
            raise FlagMismatchError(f"flag {rate!r} is not an atom of the discretized measure")
        m[i] = k
    return m


def forward_side(z0: DiffusionState, s0: DualState, mu_n, t: float, reps: int, dt: float = 1e-3,
                 seed: int = 0, workers: int = 1) -> MomentEstimate:
    """Estimate ``E[F((X_t, Y_t), s0)]`` over independent forward paths."""
    if not isinstance(mu_n, DiscretizedMeasure):
        mu_n = mu_n.as_discretized()
    exps = _aligned_exponents(s0, mu_n)
    if s0.total == 0:
        return MomentEstimate(1.0, 0.0, max(reps, 2))
    _, states = simulate_ensemble(z0, mu_n, dt, t, reps, seed, [t], workers)
    zt = states[:, -1, :]
    f = zt[:, 0] ** s0.n * np.prod(zt[:, 1:] ** exps, axis=1)
    return MomentEstimate.from_samples(f)


def _y_lookup(z0, mu):
    """Split ``z0`` into ``(x, y)`` with ``y`` usable at any flag the dual can produce."""
    if isinstance(z0, DiffusionState):
        if isinstance(mu, DiscretizedMeasure) or mu.kind == "discrete":
            return z0.x, dict(zip(mu.rates.tolist(), z0.y.tolist()))
        raise ValueError("a continuous measure needs z0 = (x, y) with y callable; see binned_y")
    x, y = z0
    return float(x), y


def binned_y(mu_n: DiscretizedMeasure, values) -> Callable[[float], float]:
    """Step function of the rate: the value of the bin ``(lam_{i-1}, lam_i]`` holding it.

    Rates beyond the last bin get the last value.
    """
    rates = mu_n.rates
    values = np.asarray(values, dtype=float)

    def y(lam):
        return float(values[min(int(np.searchsorted(rates, lam, side="left")), rates.size - 1)])

    return y


def dual_side(z0, s0: DualState, mu, t: float, reps: int, seed: int = 0) -> MomentEstimate:
    """Estimate ``E[F((x, y), S_t)]`` over independent dual chains started at ``s0``.

    ``z0`` is a DiffusionState aligned with the atoms of a discrete ``mu`` or a
    pair ``(x, y)`` where ``y`` is a scalar, a mapping or a callable of the rate.
    Discrete measures run on the count-level kernel; others use the event-level
    simulator.
    """
    x, y = _y_lookup(z0, mu)
    if s0.total == 0:
        return MomentEstimate(1.0, 0.0, max(reps, 2))
    if isinstance(mu, DiscretizedMeasure) or mu.kind == "discrete":
        mu_n = mu if isinstance(mu, DiscretizedMeasure) else mu.as_discretized()
        n, m, _ = block_count_ensemble(s0, mu_n, t, reps, seed)
        yv = np.array([_y_at(y, r, i) for i, r in enumerate(mu_n.rates)])
        f = x ** n * np.prod(yv[None, :] ** m, axis=1)
        return MomentEstimate.from_samples(f)
    f = np.empty(reps)
    for r in range(reps):
        run = simulate_dual(s0, mu, t, Stream(seed, Purpose.DUAL, r))
        f[r] = dual_function(x, y, run.state)
    return MomentEstimate.from_samples(f)


def duality_gap(a: MomentEstimate, b: MomentEstimate, threshold: float = Z_THRESHOLD):
    """Welch-type z-score of the difference and whether it passes at ``threshold`` sigma."""
    if not (math.isfinite(a.value) and math.isfinite(b.value)):
        raise ValueError("estimates must be finite")
    diff = abs(a.value - b.value)
    scale = math.sqrt(a.se ** 2 + b.se ** 2)
    if scale == 0.0:
        if diff == 0.0:
            return 0.0, True
        raise ZeroVarianceError(f"both standard errors vanish but values differ ({a.value} vs {b.value})")
    z = diff / scale
    return z, z <= threshold
