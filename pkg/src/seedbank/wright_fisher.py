"""Discrete Wright-Fisher model with finitely many seed-banks.

Each generation ``N - c`` active individuals are produced by plain binomial
resampling.  The remaining ``c`` slots swap with the banks: ``c`` offspring of
random active parents go dormant, the bank for each is drawn with probability
``c_i / c``, and the same number of dormant individuals per bank wake up,
chosen without replacement.  Time sped up by ``N`` approaches the diffusion.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .exceptions import BankTooSmallError, InvalidStateError, NonIntegerMassError, SeedbankError
from .forward import DiffusionState, EnsembleSummary
from .measure import DiscretizedMeasure, SeedBankMeasure, discretize
from .rng import Purpose, as_stream, stream_keys, uniforms

CHUNK = 4096


@dataclass(frozen=True)
class Bank:
    size: int
    mass: float
    rate: float


@dataclass(frozen=True)
class WFParams:
    N: int
    c: int
    banks: tuple
    dropped_mass: float = 0.0

    def __post_init__(self):
        banks = tuple(b if isinstance(b, Bank) else Bank(*b) for b in self.banks)
        object.__setattr__(self, "banks", banks)
        if int(self.N) != self.N or self.N < 1:
            raise SeedbankError(f"N must be a positive integer, got {self.N}")
        if int(self.c) != self.c or self.c < 1:
            raise SeedbankError(f"c must be a positive integer, got {self.c}")
        if self.c > self.N:
            raise SeedbankError(f"c={self.c} exceeds N={self.N}")
        if not banks:
            raise SeedbankError("at least one seed-bank is required")
        for b in banks:
            if int(b.size) != b.size or b.size < 1:
                raise SeedbankError(f"bank size must be a positive integer, got {b.size}")
            if not b.mass > 0.0:
                raise SeedbankError(f"bank mass must be positive, got {b.mass}")
            if b.size < self.c:
                raise BankTooSmallError(f"bank of size {b.size} is smaller than c={self.c}", b.mass)
            if not math.isclose(b.rate, b.mass * self.N / b.size, rel_tol=1e-12):
                raise SeedbankError(f"bank rate {b.rate} is not mass*N/size = {b.mass * self.N / b.size}")
        if not math.isclose(math.fsum(b.mass for b in banks), self.c, rel_tol=1e-9):
            raise SeedbankError(f"bank masses sum to {math.fsum(b.mass for b in banks)}, not c={self.c}")

    @classmethod
    def from_sizes(cls, N: int, sizes, masses) -> "WFParams":
        masses = [float(m) for m in masses]
        banks = [Bank(int(s), m, m * N / int(s)) for s, m in zip(sizes, masses)]
        return cls(int(N), int(round(math.fsum(masses))), tuple(banks))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.banks], dtype=np.int64)

    @property
    def masses(self) -> np.ndarray:
        return np.array([b.mass for b in self.banks])

    @property
    def rates(self) -> np.ndarray:
        return np.array([b.rate for b in self.banks])

    def measure(self) -> DiscretizedMeasure:
        """The atoms ``(rate_i, mass_i)`` the embedded process lives on."""
        return DiscretizedMeasure.from_atoms(zip(self.rates, self.masses))


@dataclass(frozen=True)
class WFState:
    """Type-A counts: ``active`` out of N and ``dormant[i]`` out of ``sizes[i]``."""

    active: int
    dormant: tuple
    N: int
    sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "dormant", tuple(int(d) for d in self.dormant))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "active", int(self.active))
        if not 0 <= self.active <= self.N:
            raise InvalidStateError(f"active count {self.active} outside [0, {self.N}]")
        if len(self.dormant) != len(self.sizes):
            raise InvalidStateError("one dormant count per bank is required")
        for d, s in zip(self.dormant, self.sizes):
            if not 0 <= d <= s:
                raise InvalidStateError(f"dormant count {d} outside [0, {s}]")

    @classmethod
    def from_frequencies(cls, x: float, y, params: WFParams) -> "WFState":
        """Lattice state closest to ``(x, y)``; ``y`` may be a scalar."""
        sizes = params.sizes
        y = np.broadcast_to(np.asarray(y, dtype=float), sizes.shape)
        return cls(int(round(x * params.N)), tuple(int(v) for v in np.rint(y * sizes)), params.N, tuple(sizes))

    @property
    def x(self) -> float:
        return self.active / self.N

    @property
    def y(self) -> np.ndarray:
        return np.array(self.dormant) / np.array(self.sizes)


def uniforms_per_step(params: WFParams) -> int:
    return 1 + 3 * params.c


def _wf_step_counts(active, dormant, params: WFParams, u):
    """Vectorised generation update.

    ``active`` has shape ``(reps,)``, ``dormant`` ``(reps, n_banks)`` and ``u``
    ``(reps, 1 + 3c)``.  Column 0 drives the binomial offspring count by
    inversion; migrant ``j`` uses columns ``1 + 3j`` (bank), ``2 + 3j``
    (parent type) and ``3 + 3j`` (which dormant individual wakes up).
    """
    N, c = params.N, params.c
    sizes = params.sizes
    cum = np.cumsum(params.masses)
    reps = active.shape[0]
    rows = np.arange(reps)
    x = active / N

    offspring = binom.ppf(u[:, 0], N - c, x).astype(np.int64) if N > c else np.zeros(reps, dtype=np.int64)
    woken_a = np.zeros_like(dormant)
    sown_a = np.zeros_like(dormant)
    left_a = dormant.copy()
    left = np.broadcast_to(sizes, dormant.shape).copy()
    for j in range(c):
        bank = np.minimum(np.searchsorted(cum, u[:, 1 + 3 * j] * cum[-1], side="right"), sizes.size - 1)
        sown_a[rows, bank] += u[:, 2 + 3 * j] < x
        pick_a = u[:, 3 + 3 * j] * left[rows, bank] < left_a[rows, bank]
        woken_a[rows, bank] += pick_a
        left_a[rows, bank] -= pick_a
        left[rows, bank] -= 1
    return offspring + woken_a.sum(axis=1), dormant - woken_a + sown_a


def _check_state(state: WFState, params: WFParams):
    if state.N != params.N or tuple(state.sizes) != tuple(params.sizes):
        raise InvalidStateError("state does not match the model's population sizes")


def wf_step(state: WFState, params: WFParams, rng=None) -> WFState:
    stream = as_stream(rng, Purpose.WF)
    _check_state(state, params)
    u = stream.uniforms(uniforms_per_step(params))[None, :]
    active, dormant = _wf_step_counts(np.array([state.active]), np.array([state.dormant], dtype=np.int64), params, u)
    return WFState(int(active[0]), tuple(dormant[0]), params.N, state.sizes)


def build_model(mu, N: int, n_bins: int | None = None, cutoff: float | None = None) -> WFParams:
    """Wright-Fisher parameters approximating ``mu`` with population size ``N``.

    Discrete measures use their atoms directly.  Otherwise ``mu`` is binned on
    ``n_bins`` cells up to ``cutoff`` and the mass above the cutoff is added to
    the last bin, so that exactly ``c`` individuals migrate per generation.
    Bank sizes are rounded and the rates recomputed as ``c_i N / M_i``.
    """
    c_total = mu.total_mass
    c = int(round(c_total))
    if c < 1 or abs(c_total - c) > 1e-9 * max(1.0, c_total):
        raise NonIntegerMassError(f"total mass {c_total} is not a positive integer")
    if N < c:
        raise SeedbankError(f"N={N} is smaller than c={c}")
    if isinstance(mu, DiscretizedMeasure):
        atoms = list(mu.atoms)
        extra = mu.tail_mass
    elif mu.kind == "discrete":
        atoms, extra = list(mu.atoms), 0.0
    else:
        if n_bins is None or cutoff is None:
            raise SeedbankError("a continuous measure needs n_bins and cutoff")
        binned = discretize(mu, n_bins, cutoff)
        atoms, extra = list(binned.atoms), binned.tail_mass
    if extra > 0.0:
        rate, mass = atoms[-1]
        atoms[-1] = (rate, mass + extra)

    sizes = [max(1, int(round(m * N / r))) for r, m in atoms]
    small = [(r, m) for (r, m), s in zip(atoms, sizes) if s < c]
    if small:
        dropped = math.fsum(m for _, m in small)
        raise BankTooSmallError(
            f"{len(small)} bin(s) would hold fewer than c={c} individuals (mass {dropped:.6g})", dropped)
    banks = tuple(Bank(s, m, m * N / s) for (_, m), s in zip(atoms, sizes))
    return WFParams(int(N), c, banks)


def embed(state: WFState, params: WFParams) -> DiffusionState:
    _check_state(state, params)
    return DiffusionState(state.x, state.y)


def _record_generations(N: int, t_max: float, record_times):
    total = int(math.floor(N * t_max + 1e-9))
    if record_times is None:
        gens = np.array([total], dtype=np.int64)
    else:
        gens = np.array([int(math.floor(N * t + 1e-9)) for t in np.atleast_1d(record_times)], dtype=np.int64)
        if np.any(gens < 0) or np.any(gens > total) or np.any(np.diff(gens) < 0):
            raise ValueError("record_times must be sorted and within [0, t_max]")
    return total, gens


def simulate_counts(params: WFParams, z0: WFState, generations: int, reps: int, seed: int = 0,
                    record_generations=None, start: int = 0):
    """Raw count trajectories; returns ``(active, dormant)`` at the recorded generations.

    Shapes are ``(reps, n_rec)`` and ``(reps, n_rec, n_banks)``.  Replicate
    ``r`` draws generation ``g`` from counters ``g * (1 + 3c) ..`` of stream
    ``(seed, WF, start + r)``.
    """
    _check_state(z0, params)
    rec = np.array([generations] if record_generations is None else record_generations, dtype=np.int64)
    width = uniforms_per_step(params)
    keys = stream_keys(seed, Purpose.WF, reps, start)
    active = np.full(reps, z0.active, dtype=np.int64)
    dormant = np.tile(np.array(z0.dormant, dtype=np.int64), (reps, 1))
    out_a = np.empty((reps, rec.size), dtype=np.int64)
    out_d = np.empty((reps, rec.size, len(params.banks)), dtype=np.int64)
    cols = np.arange(width, dtype=np.uint64)
    j = 0
    while j < rec.size and rec[j] == 0:
        out_a[:, j], out_d[:, j] = active, dormant
        j += 1
    for g in range(generations):
        u = uniforms(keys[:, None], np.uint64(g * width) + cols[None, :])
        active, dormant = _wf_step_counts(active, dormant, params, u)
        while j < rec.size and rec[j] == g + 1:
            out_a[:, j], out_d[:, j] = active, dormant
            j += 1
    return out_a, out_d


def rescaled_ensemble(params: WFParams, z0: WFState, t_max: float, reps: int, seed: int = 0,
                      record_times=None, workers: int = 1) -> EnsembleSummary:
    """Embedded active frequency at times ``floor(N t) / N``, summarised over replicates."""
    if params.c < 1:
        raise SeedbankError("the model needs c >= 1")
    total, gens = _record_generations(params.N, t_max, record_times)
    starts = list(range(0, reps, CHUNK))

    def run(start):
        active, _ = simulate_counts(params, z0, total, min(CHUNK, reps - start), seed, gens, start)
        return active / params.N

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return EnsembleSummary.from_samples(gens / params.N, np.concatenate(parts, axis=0))
