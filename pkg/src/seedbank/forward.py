"""Forward simulation of the seed-bank diffusion on a discretized rate measure.

The active frequency follows a clamped Euler-Maruyama step; each seed-bank
frequency relaxes towards the (frozen) active frequency with the exact
exponential integrator.  The equivalent Volterra equation is simulated by an
explicit full-history scheme, and first moments come from the linear moment
system via a matrix exponential.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import kernels
from .exceptions import DimensionMismatchError, InvalidStateError, NonPositiveStepError
from .measure import DiscretizedMeasure, SeedBankMeasure, initial_offset, kernel_cdf, moments
from .rng import Purpose, normals, stream_key, stream_keys

CHUNK = 8192


@dataclass(frozen=True)
class DiffusionState:
    x: float
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t: float = 0.0

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).copy()
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", float(self.x))
        if not 0.0 <= self.x <= 1.0 or np.any((y < 0.0) | (y > 1.0)):
            raise InvalidStateError(f"state ({self.x}, {y}) is outside the unit box")

    @classmethod
    def uniform(cls, p: float, n_atoms: int) -> "DiffusionState":
        return cls(p, np.full(n_atoms, p))

    def __eq__(self, other):
        return (isinstance(other, DiffusionState) and self.x == other.x and self.t == other.t
                and np.array_equal(self.y, other.y))

    __hash__ = None


@dataclass(frozen=True)
class PathConfig:
    dt: float
    t_max: float
    seed: int = 0
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise NonPositiveStepError(f"dt must be positive, got {self.dt}")
        if not self.t_max > 0.0:
            raise NonPositiveStepError(f"t_max must be positive, got {self.t_max}")
        if self.dt > self.t_max:
            raise NonPositiveStepError(f"dt={self.dt} exceeds t_max={self.t_max}")
        if int(self.record_stride) < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def n_steps(self) -> int:
        return n_steps(self.t_max, self.dt)


@dataclass(frozen=True)
class Path:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray  # shape (len(t), n_atoms)

    def states(self):
        return [DiffusionState(x, y, t) for t, x, y in zip(self.t, self.x, self.y)]


@dataclass(frozen=True)
class EnsembleSummary:
    t: np.ndarray
    mean_x: np.ndarray
    var_x: np.ndarray
    se_x: np.ndarray
    reps: int

    @classmethod
    def from_samples(cls, t, xs: np.ndarray) -> "EnsembleSummary":
        """``xs`` has shape ``(reps, len(t))``."""
        reps = xs.shape[0]
        mean = xs.mean(axis=0)
        var = xs.var(axis=0, ddof=1) if reps > 1 else np.zeros_like(mean)
        return cls(np.asarray(t, dtype=float), mean, var, np.sqrt(var / reps), reps)


def n_steps(t_max: float, dt: float) -> int:
    """Number of steps to cover ``t_max``; tolerant to round-off in ``t_max / dt``."""
    return max(1, math.ceil(t_max / dt - 1e-9))


def _as_discretized(mu) -> DiscretizedMeasure:
    if isinstance(mu, DiscretizedMeasure):
        return mu
    return mu.as_discretized()


def _check(state: DiffusionState, mu_n: DiscretizedMeasure):
    if state.y.shape[0] != len(mu_n):
        raise DimensionMismatchError(f"state has {state.y.shape[0]} seed-banks, measure has {len(mu_n)} atoms")


def drift_x(state: DiffusionState, mu_n) -> float:
    mu_n = _as_discretized(mu_n)
    _check(state, mu_n)
    return float(np.dot(mu_n.masses, state.y) - mu_n.total_mass * state.x)


def em_step(state: DiffusionState, mu_n, dt: float, dw: float) -> DiffusionState:
    """One step; ``dw`` is the Brownian increment over ``dt``, supplied by the caller."""
    if not dt > 0.0:
        raise NonPositiveStepError(f"dt must be positive, got {dt}")
    mu_n = _as_discretized(mu_n)
    _check(state, mu_n)
    out = kernels.em_path(state.x, state.y, mu_n.rates, mu_n.masses, float(dt), np.array([dw], dtype=float))
    return DiffusionState(out[1, 0], out[1, 1:], state.t + dt)


def brownian_increments(seed: int, dt: float, steps: int, rep: int = 0) -> np.ndarray:
    """Increments of the driving Brownian motion for replicate ``rep``.

    These are exactly the increments the ensemble kernels draw, so a single
    path and replicate ``rep`` of an ensemble coincide.
    """
    key = np.uint64(stream_key(seed, Purpose.FORWARD, rep))
    return math.sqrt(dt) * normals(key, np.arange(steps, dtype=np.uint64))


def coarsen(dw: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments: the same Brownian path on a coarser grid."""
    dw = np.asarray(dw, dtype=float)
    if dw.size % factor:
        raise DimensionMismatchError(f"{dw.size} increments do not split into blocks of {factor}")
    return dw.reshape(-1, factor).sum(axis=1)


def _record_index(steps: int, stride: int) -> np.ndarray:
    idx = list(range(0, steps + 1, stride))
    if idx[-1] != steps:
        idx.append(steps)
    return np.array(idx, dtype=np.int64)


def simulate_path(z0: DiffusionState, mu_n, cfg: PathConfig, rep: int = 0, noise=None) -> Path:
    mu_n = _as_discretized(mu_n)
    _check(z0, mu_n)
    steps = cfg.n_steps
    dw = brownian_increments(cfg.seed, cfg.dt, steps, rep) if noise is None else np.asarray(noise, dtype=float)
    if dw.shape != (steps,):
        raise DimensionMismatchError(f"expected {steps} increments, got {dw.shape}")
    full = kernels.em_path(z0.x, z0.y, mu_n.rates, mu_n.masses, cfg.dt, dw)
    idx = _record_index(steps, int(cfg.record_stride))
    return Path(z0.t + idx * cfg.dt, full[idx, 0], full[idx, 1:])


def simulate_sve_path(x0: float, y0, mu, cfg: PathConfig, noise=None, rep: int = 0) -> Path:
    """Explicit left-point discretisation of the Volterra equation for X alone.

    Cost is quadratic in the number of steps.  ``mu`` may be any measure with a
    closed-form kernel (discrete, discretized or Gamma).
    """
    steps = cfg.n_steps
    dt = cfg.dt
    dw = brownian_increments(cfg.seed, dt, steps, rep) if noise is None else np.asarray(noise, dtype=float)
    if dw.shape != (steps,):
        raise DimensionMismatchError(f"expected {steps} increments, got {dw.shape}")
    c, _ = moments(mu)
    grid = np.arange(steps + 1) * dt
    weights = c * np.asarray(kernel_cdf(mu, grid)) - c
    offset = np.asarray(initial_offset(mu, float(x0), y0, grid))
    x = kernels.sve_path(float(x0), offset, weights, dt, dw)
    idx = _record_index(steps, int(cfg.record_stride))
    return Path(grid[idx], x[idx], np.zeros((idx.size, 0)))


def moment_ode(z0: DiffusionState, mu_n, t):
    """Exact first moments ``(E[X_t], E[Y_t(lam_1)], ...)`` by matrix exponential.

    Returns a vector for scalar ``t`` and an array ``(len(t), 1 + n_atoms)``
    otherwise.
    """
    mu_n = _as_discretized(mu_n)
    _check(z0, mu_n)
    rates, masses = mu_n.rates, mu_n.masses
    k = rates.size
    gen = np.zeros((k + 1, k + 1))
    gen[0, 0] = -masses.sum()
    gen[0, 1:] = masses
    gen[1:, 0] = rates
    gen[1:, 1:] = -np.diag(rates)
    z = np.concatenate([[z0.x], z0.y])
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([expm(gen * tt) @ z for tt in ts])
    return out[0] if np.ndim(t) == 0 else out


def simulate_ensemble(z0: DiffusionState, mu_n, dt: float, t_max: float, reps: int, seed: int = 0,
                      record_times=None, workers: int = 1, backend: str | None = None):
    """States of ``reps`` independent replicates at ``record_times``.

    Returns ``(times, states)`` with ``states`` of shape
    ``(reps, len(times), 1 + n_atoms)``.  Replicate ``r`` always uses stream
    ``(seed, FORWARD, r)``, so the output does not depend on ``workers``.
    """
    if not dt > 0.0:
        raise NonPositiveStepError(f"dt must be positive, got {dt}")
    mu_n = _as_discretized(mu_n)
    _check(z0, mu_n)
    steps = n_steps(t_max, dt)
    if record_times is None:
        rec = np.array([steps], dtype=np.int64)
    else:
        rec = np.array([int(round(tt / dt)) for tt in np.atleast_1d(record_times)], dtype=np.int64)
        if np.any(rec < 0) or np.any(rec > steps) or np.any(np.diff(rec) < 0):
            raise ValueError("record_times must be sorted and within [0, t_max]")
    impl = kernels.get(backend)
    starts = list(range(0, reps, CHUNK))

    def run(start):
        keys = stream_keys(seed, Purpose.FORWARD, min(CHUNK, reps - start), start)
        return impl.em_ensemble(keys, z0.x, z0.y, mu_n.rates, mu_n.masses, float(dt), steps, rec)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    states = np.concatenate(parts, axis=0) if parts else np.empty((0, rec.size, 1 + len(mu_n)))
    return z0.t + rec * dt, states


def ensemble_summary(z0: DiffusionState, mu_n, dt: float, t_max: float, reps: int, seed: int = 0,
                     record_times=None, workers: int = 1) -> EnsembleSummary:
    times, states = simulate_ensemble(z0, mu_n, dt, t_max, reps, seed, record_times, workers)
    return EnsembleSummary.from_samples(times, states[:, :, 0])


def as_diffusion_state(x, y, mu_n) -> DiffusionState:
    """Build a state aligned with ``mu_n`` from a scalar or per-atom ``y``."""
    mu_n = _as_discretized(mu_n) if isinstance(mu_n, (DiscretizedMeasure, SeedBankMeasure)) else mu_n
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = np.full(len(mu_n), float(y))
    if y.shape != (len(mu_n),):
        raise DimensionMismatchError(f"y has {y.size} entries for {len(mu_n)} atoms")
    return DiffusionState(x, y)
