"""Dual side: block-counting jump process, marked-partition coalescent, ancestral chain.

A dual state is ``(n, m)`` with ``n`` active lineages and ``m`` a finite
counting measure on dormancy rates.  Active lineages go dormant at total rate
``c * n`` with a rate drawn from ``mu / c``, a dormant lineage with rate
``lam`` wakes up at rate ``lam``, and each pair of active lineages merges at
rate one.  Flags are kept as exact floats so that lookups are key matches.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import expm

from . import kernels
from .exceptions import (
    AbsorbingStateError,
    FlagMismatchError,
    FlagNotInModelError,
    InvalidStateError,
    StateSpaceTooLargeError,
)
from .measure import DiscretizedMeasure, moments, sample_rate
from .rng import Purpose, as_stream, stream_keys

MAX_EXACT_ATOMS = 4
MAX_EXACT_COUNT = 6


@dataclass(frozen=True)
class DualState:
    n: int
    m: tuple = ()  # sorted ((rate, multiplicity), ...)

    def __post_init__(self):
        items = self.m.items() if isinstance(self.m, Mapping) else self.m
        merged: dict[float, int] = {}
        for rate, k in items:
            rate = float(rate)
            if int(k) != k or k < 0:
                raise InvalidStateError(f"multiplicity must be a non-negative integer, got {k}")
            if not rate > 0.0:
                raise InvalidStateError(f"flag rates must be positive, got {rate}")
            merged[rate] = merged.get(rate, 0) + int(k)
        if int(self.n) != self.n or self.n < 0:
            raise InvalidStateError(f"active count must be a non-negative integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", tuple(sorted((r, k) for r, k in merged.items() if k > 0)))

    @property
    def dormant(self) -> dict:
        return dict(self.m)

    @property
    def total(self) -> int:
        return self.n + sum(k for _, k in self.m)

    def multiplicity(self, rate: float) -> int:
        return self.dormant.get(float(rate), 0)

    def __str__(self):
        inner = ", ".join(f"{r:g}->{k}" for r, k in self.m)
        return f"({self.n}, {{{inner}}})"


@dataclass(frozen=True)
class MarkedPartition:
    """Blocks of ``{1..K}``, each flagged 0 (active) or with a dormancy rate."""

    blocks: tuple
    flags: tuple

    def __post_init__(self):
        blocks = [tuple(sorted(int(i) for i in b)) for b in self.blocks]
        flags = [float(f) for f in self.flags]
        if len(blocks) != len(flags):
            raise InvalidStateError(f"{len(blocks)} blocks but {len(flags)} flags")
        if any(not b for b in blocks):
            raise InvalidStateError("blocks must be nonempty")
        elems = sorted(i for b in blocks for i in b)
        if elems != list(range(1, len(elems) + 1)):
            raise InvalidStateError("blocks must cover {1..K} exactly once")
        if any(f < 0.0 for f in flags):
            raise InvalidStateError("flags must be 0 or a positive rate")
        order = sorted(range(len(blocks)), key=lambda i: blocks[i][0])
        object.__setattr__(self, "blocks", tuple(blocks[i] for i in order))
        object.__setattr__(self, "flags", tuple(flags[i] for i in order))

    @classmethod
    def singletons(cls, K: int) -> "MarkedPartition":
        return cls(tuple((i,) for i in range(1, K + 1)), (0.0,) * K)

    @property
    def K(self) -> int:
        return sum(len(b) for b in self.blocks)

    def active_blocks(self) -> list[int]:
        return [i for i, f in enumerate(self.flags) if f == 0.0]

    def to_json(self) -> dict:
        return {"blocks": [list(b) for b in self.blocks], "flags": list(self.flags)}

    @classmethod
    def from_json(cls, data) -> "MarkedPartition":
        return cls(tuple(tuple(b) for b in data["blocks"]), tuple(data["flags"]))


def _reflag(pi: MarkedPartition, i: int, flag: float) -> MarkedPartition:
    flags = list(pi.flags)
    flags[i] = float(flag)
    return MarkedPartition(pi.blocks, tuple(flags))


def deactivate(pi: MarkedPartition, i: int, rate: float) -> MarkedPartition:
    if pi.flags[i] != 0.0:
        raise InvalidStateError("only an active block can go dormant")
    return _reflag(pi, i, rate)


def reactivate(pi: MarkedPartition, i: int) -> MarkedPartition:
    if pi.flags[i] == 0.0:
        raise InvalidStateError("block is already active")
    return _reflag(pi, i, 0.0)


def merge_blocks(pi: MarkedPartition, i: int, j: int) -> MarkedPartition:
    if i == j or pi.flags[i] != 0.0 or pi.flags[j] != 0.0:
        raise InvalidStateError("only two distinct active blocks can merge")
    keep = [k for k in range(len(pi.blocks)) if k not in (i, j)]
    blocks = [pi.blocks[k] for k in keep] + [pi.blocks[i] + pi.blocks[j]]
    flags = [pi.flags[k] for k in keep] + [0.0]
    return MarkedPartition(tuple(blocks), tuple(flags))


def block_counting(pi: MarkedPartition) -> DualState:
    n = sum(1 for f in pi.flags if f == 0.0)
    m: dict[float, int] = {}
    for f in pi.flags:
        if f > 0.0:
            m[f] = m.get(f, 0) + 1
    return DualState(n, m)


def total_rate(s: DualState, mu) -> float:
    c, _ = moments(mu)
    return c * s.n + math.fsum(r * k for r, k in s.m) + 0.5 * s.n * (s.n - 1)


@dataclass(frozen=True)
class DualEvent:
    time: float
    kind: str  # "deactivate", "reactivate" or "merge"
    rate: float = 0.0
    block: tuple = ()  # sample ids of the affected block, coalescent only

    def detail(self) -> str:
        parts = [] if self.kind == "merge" else [f"rate={self.rate!r}"]
        if self.block:
            parts.append("block=" + "|".join(str(i) for i in self.block))
        return " ".join(parts)


def _dual_event(s: DualState, mu, stream):
    c, _ = moments(mu)
    weights = [c * s.n] + [r * k for r, k in s.m] + [0.5 * s.n * (s.n - 1)]
    total = math.fsum(weights)
    if total <= 0.0:
        raise AbsorbingStateError(f"no transition is possible from {s}")
    hold = stream.exponential(total)
    pick = stream.choice(weights)
    m = s.dormant
    if pick == 0:
        rate = sample_rate(mu, stream)
        m[rate] = m.get(rate, 0) + 1
        return hold, DualState(s.n - 1, m), "deactivate", rate
    if pick == len(weights) - 1:
        return hold, DualState(s.n - 1, m), "merge", 0.0
    rate = s.m[pick - 1][0]
    m[rate] -= 1
    return hold, DualState(s.n + 1, m), "reactivate", rate


def dual_step(s: DualState, mu, rng=None):
    """One jump: ``(holding time, new state)``.  Raises at absorbing states."""
    hold, new, _, _ = _dual_event(s, mu, as_stream(rng, Purpose.DUAL))
    return hold, new


@dataclass(frozen=True)
class DualRun:
    state: DualState
    events: tuple = field(default=())


def simulate_dual(s0: DualState, mu, t: float, rng=None, log: bool = False) -> DualRun:
    """Gillespie run up to time ``t``; stops early once no transition is possible."""
    stream = as_stream(rng, Purpose.DUAL)
    s, clock, events = s0, 0.0, []
    while total_rate(s, mu) > 0.0:
        hold, new, kind, rate = _dual_event(s, mu, stream)
        if clock + hold > t:
            break
        clock += hold
        s = new
        if log:
            events.append(DualEvent(clock, kind, rate))
    return DualRun(s, tuple(events))


def coalescent_step(pi: MarkedPartition, mu, rng=None):
    """One jump of the marked-partition coalescent: ``(holding time, partition)``."""
    stream = as_stream(rng, Purpose.COALESCENT)
    hold, new, _ = _coalescent_event(pi, mu, stream)
    return hold, new


def _coalescent_event(pi: MarkedPartition, mu, stream):
    c, _ = moments(mu)
    active = pi.active_blocks()
    dormant = [i for i, f in enumerate(pi.flags) if f > 0.0]
    pairs = list(itertools.combinations(active, 2))
    weights = [c] * len(active) + [pi.flags[i] for i in dormant] + [1.0] * len(pairs)
    total = math.fsum(weights)
    if total <= 0.0:
        raise AbsorbingStateError("no transition is possible")
    hold = stream.exponential(total)
    pick = stream.choice(weights)
    if pick < len(active):
        i = active[pick]
        rate = sample_rate(mu, stream)
        return hold, deactivate(pi, i, rate), DualEvent(0.0, "deactivate", rate, pi.blocks[i])
    pick -= len(active)
    if pick < len(dormant):
        i = dormant[pick]
        return hold, reactivate(pi, i), DualEvent(0.0, "reactivate", pi.flags[i], pi.blocks[i])
    i, j = pairs[pick - len(dormant)]
    return hold, merge_blocks(pi, i, j), DualEvent(0.0, "merge", 0.0, tuple(sorted(pi.blocks[i] + pi.blocks[j])))


def simulate_coalescent(pi0: MarkedPartition, mu, t: float, rng=None, log: bool = False):
    """Partition at time ``t`` and, optionally, the list of events."""
    stream = as_stream(rng, Purpose.COALESCENT)
    pi, clock, events = pi0, 0.0, []
    c, _ = moments(mu)
    while c > 0.0 or len(pi.active_blocks()) > 1 or any(f > 0.0 for f in pi.flags):
        hold, new, ev = _coalescent_event(pi, mu, stream)
        if clock + hold > t:
            break
        clock += hold
        pi = new
        if log:
            events.append(DualEvent(clock, ev.kind, ev.rate, ev.block))
    return pi, tuple(events)


def dual_transitions(s: DualState, mu) -> list[tuple[DualState, float]]:
    """Outgoing ``(target, rate)`` pairs of the dual chain on a discrete measure."""
    mu_n = _discrete(mu)
    out = []
    for rate, mass in mu_n.atoms:
        if s.n > 0 and mass > 0.0:
            m = s.dormant
            m[rate] = m.get(rate, 0) + 1
            out.append((DualState(s.n - 1, m), s.n * mass))
    for rate, k in s.m:
        m = s.dormant
        m[rate] -= 1
        out.append((DualState(s.n + 1, m), rate * k))
    if s.n > 1:
        out.append((DualState(s.n - 1, s.m), 0.5 * s.n * (s.n - 1)))
    return out


def coalescent_transitions(pi: MarkedPartition, mu) -> list[tuple[MarkedPartition, float]]:
    """Outgoing ``(target, rate)`` pairs of the marked-partition coalescent on a discrete measure."""
    mu_n = _discrete(mu)
    active = pi.active_blocks()
    out = []
    for i in active:
        for rate, mass in mu_n.atoms:
            out.append((deactivate(pi, i, rate), mass))
    for i, f in enumerate(pi.flags):
        if f > 0.0:
            out.append((reactivate(pi, i), f))
    for i, j in itertools.combinations(active, 2):
        out.append((merge_blocks(pi, i, j), 1.0))
    return out


def ancestral_probabilities(pi: MarkedPartition, params):
    """Single-event probabilities per generation, as ``(kind, block(s), target, prob)`` rows."""
    N, c = params.N, params.c
    rates = [b.rate for b in params.banks]
    rate_set = set(rates)
    rows = []
    for i, f in enumerate(pi.flags):
        if f > 0.0 and f not in rate_set:
            raise FlagNotInModelError(f"flag {f!r} is not a bank rate of the model")
    active = pi.active_blocks()
    for i in active:
        for b in params.banks:
            rows.append(("deactivate", (i,), b.rate, b.mass / N))
    for i, f in enumerate(pi.flags):
        if f > 0.0:
            rows.append(("reactivate", (i,), 0.0, f / N))
    merge_p = (1.0 - c / N) ** 2 / N
    for i, j in itertools.combinations(active, 2):
        rows.append(("merge", (i, j), 0.0, merge_p))
    return rows


def _apply(pi, row):
    kind, idx, target, _ = row
    if kind == "deactivate":
        return deactivate(pi, idx[0], target)
    if kind == "reactivate":
        return reactivate(pi, idx[0])
    return merge_blocks(pi, *idx)


def ancestral_step(pi: MarkedPartition, params, rng=None) -> MarkedPartition:
    """One generation backwards in time: at most one event, otherwise unchanged.

    Only the order-1/N transitions are modelled.  If their probabilities add
    up to more than one (tiny N) an event always happens, chosen proportionally.
    """
    stream = as_stream(rng, Purpose.ANCESTRAL)
    rows = ancestral_probabilities(pi, params)
    u = stream.uniform()
    total = math.fsum(r[3] for r in rows)
    scale = max(total, 1.0)
    acc = 0.0
    for row in rows:
        acc += row[3] / scale
        if u < acc:
            return _apply(pi, row)
    return pi


def simulate_ancestral(pi0: MarkedPartition, params, generations: int, rng=None) -> MarkedPartition:
    """Run the ancestral chain for ``generations`` steps, skipping idle stretches geometrically."""
    stream = as_stream(rng, Purpose.ANCESTRAL)
    pi, gen = pi0, 0
    while True:
        rows = ancestral_probabilities(pi, params)
        total = math.fsum(r[3] for r in rows)
        if total <= 0.0:
            return pi
        u = stream.uniform()
        wait = 1 if total >= 1.0 else math.floor(math.log(u) / math.log1p(-total)) + 1
        if gen + wait > generations:
            return pi
        gen += wait
        pi = _apply(pi, rows[stream.choice([r[3] for r in rows])])


def _atom_vector(s: DualState, mu_n: DiscretizedMeasure) -> np.ndarray:
    m = np.zeros(len(mu_n), dtype=np.int64)
    for rate, k in s.m:
        i = mu_n.index_of(rate)
        if i < 0:
            raise FlagMismatchError(f"flag {rate!r} is not an atom of the measure")
        m[i] = k
    return m


def _discrete(mu) -> DiscretizedMeasure:
    if isinstance(mu, DiscretizedMeasure):
        return mu
    return mu.as_discretized()


def block_count_ensemble(s0: DualState, mu, t: float, reps: int, seed: int = 0,
                         purpose: int = Purpose.DUAL, backend: str | None = None):
    """Many independent dual chains on a discrete measure, at count level.

    Returns ``(n, m, first_wait)`` with ``m[r, i]`` the number of dormant
    lineages on atom ``i``.
    """
    mu_n = _discrete(mu)
    m0 = _atom_vector(s0, mu_n)
    keys = stream_keys(seed, purpose, reps)
    n, m, first, _ = kernels.get(backend).count_chain(keys, s0.n, m0, mu_n.rates, mu_n.masses, float(t), 0)
    return n, m, first


def ancestral_block_counts(s0: DualState, params, generations: int, reps: int, seed: int = 0,
                           purpose: int = Purpose.ANCESTRAL, backend: str | None = None):
    """Count-level ancestral chain after ``generations`` generations; returns ``(n, m)``."""
    mu_n = DiscretizedMeasure.from_atoms(zip(params.rates, params.masses))
    for rate, _ in s0.m:
        if mu_n.index_of(rate) < 0:
            raise FlagNotInModelError(f"flag {rate!r} is not a bank rate of the model")
    m0 = _atom_vector(s0, mu_n)
    keys = stream_keys(seed, purpose, reps)
    n, m, _, _ = kernels.get(backend).count_chain(keys, s0.n, m0, mu_n.rates, mu_n.masses,
                                                  float(generations), int(params.N))
    return n, m


def enumerate_states(total: int, n_atoms: int) -> list[tuple]:
    """All ``(n, m_1..m_k)`` with ``n + sum(m) <= total``, in lexicographic order."""
    return sorted(s for s in itertools.product(range(total + 1), repeat=n_atoms + 1) if sum(s) <= total)


def generator_matrix(states, rates, masses) -> np.ndarray:
    index = {s: i for i, s in enumerate(states)}
    k = len(rates)
    q = np.zeros((len(states), len(states)))
    for s, i in index.items():
        n, m = s[0], s[1:]
        moves = []
        for a in range(k):
            if n > 0:
                moves.append(((n - 1,) + m[:a] + (m[a] + 1,) + m[a + 1:], n * masses[a]))
            if m[a] > 0:
                moves.append(((n + 1,) + m[:a] + (m[a] - 1,) + m[a + 1:], m[a] * rates[a]))
        if n > 1:
            moves.append(((n - 1,) + m, 0.5 * n * (n - 1)))
        for target, rate in moves:
            q[i, index[target]] += rate
            q[i, i] -= rate
    return q


def dual_moment_exact(s0: DualState, x: float, y, mu, t: float) -> float:
    """``E[x^N_t prod y(lam)^M_t(lam)]`` from the transient law of the finite chain."""
    mu_n = _discrete(mu)
    if len(mu_n) > MAX_EXACT_ATOMS or s0.total > MAX_EXACT_COUNT:
        raise StateSpaceTooLargeError(
            f"exact oracle supports <= {MAX_EXACT_ATOMS} atoms and total count <= {MAX_EXACT_COUNT}")
    m0 = _atom_vector(s0, mu_n)
    states = enumerate_states(s0.total, len(mu_n))
    q = generator_matrix(states, mu_n.rates, mu_n.masses)
    p = expm(q * t)[states.index((s0.n,) + tuple(int(v) for v in m0))]
    yv = np.array([_y_at(y, r, i) for i, r in enumerate(mu_n.rates)])
    f = np.array([x ** s[0] * np.prod(yv ** np.array(s[1:])) for s in states])
    return float(p @ f)


def _y_at(y, rate: float, i: int | None = None) -> float:
    if callable(y):
        return float(y(rate))
    if isinstance(y, Mapping):
        return float(y[rate])
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return float(arr[i])
