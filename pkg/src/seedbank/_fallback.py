"""Pure numpy implementations of the hot kernels.

Each function mirrors its counterpart in ``_kernels.pyx`` operation for
operation, and consumes the counter-based streams in the same pattern, so the
two backends agree replicate by replicate.
"""
from __future__ import annotations

import math

import numpy as np

from .rng import normals, uniforms


def _drift(x, y, masses):
    # sum_i c_i (y_i - x) vanishes exactly when every coordinate equals x
    acc = np.zeros_like(x)
    for i in range(masses.shape[0]):
        acc = acc + masses[i] * (y[..., i] - x)
    return acc


def em_ensemble(keys, x0, y0, rates, masses, dt, n_steps, record_steps):
    """Clamped Euler-Maruyama for X with the exponential integrator for Y.

    Returns an array ``(reps, len(record_steps), 1 + n_atoms)`` of states after
    ``record_steps[j]`` steps.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    rates = np.asarray(rates, dtype=float)
    masses = np.asarray(masses, dtype=float)
    record_steps = np.asarray(record_steps, dtype=np.int64)
    reps, n_atoms = keys.shape[0], rates.shape[0]
    gain = -np.expm1(-rates * dt)
    sqdt = math.sqrt(dt)

    x = np.full(reps, float(x0))
    y = np.tile(np.asarray(y0, dtype=float), (reps, 1)).reshape(reps, n_atoms)
    out = np.empty((reps, record_steps.shape[0], 1 + n_atoms))
    j = 0
    while j < record_steps.shape[0] and record_steps[j] == 0:
        out[:, j, 0] = x
        out[:, j, 1:] = y
        j += 1
    for step in range(n_steps):
        dw = sqdt * normals(keys, step)
        x_new = x + _drift(x, y, masses) * dt + np.sqrt(x * (1.0 - x)) * dw
        x_new = np.minimum(np.maximum(x_new, 0.0), 1.0)
        y = np.minimum(np.maximum(y + gain * (x[:, None] - y), 0.0), 1.0)
        x = x_new
        while j < record_steps.shape[0] and record_steps[j] == step + 1:
            out[:, j, 0] = x
            out[:, j, 1:] = y
            j += 1
    return out


def em_path(x0, y0, rates, masses, dt, dw):
    """One Euler path driven by the given Brownian increments; returns ``(steps + 1, 1 + n_atoms)``."""
    rates = np.asarray(rates, dtype=float)
    masses = np.asarray(masses, dtype=float)
    dw = np.asarray(dw, dtype=float)
    n_atoms = rates.shape[0]
    gain = -np.expm1(-rates * dt)
    out = np.empty((dw.shape[0] + 1, 1 + n_atoms))
    x = float(x0)
    y = np.array(y0, dtype=float).reshape(n_atoms)
    out[0, 0] = x
    out[0, 1:] = y
    for k in range(dw.shape[0]):
        drift = 0.0
        for i in range(n_atoms):
            drift += masses[i] * (y[i] - x)
        x_new = x + drift * dt + math.sqrt(x * (1.0 - x)) * dw[k]
        x_new = min(max(x_new, 0.0), 1.0)
        y = np.minimum(np.maximum(y + gain * (x - y), 0.0), 1.0)
        x = x_new
        out[k + 1, 0] = x
        out[k + 1, 1:] = y
    return out


def sve_path(x0, offset, weights, dt, dw):
    """Explicit left-point scheme for the Volterra equation.

    ``offset[k]`` is the initial-value term at ``t_k`` and ``weights[m]`` is
    ``c * K(m * dt) - c``.
    """
    offset = np.asarray(offset, dtype=float)
    weights = np.asarray(weights, dtype=float)
    dw = np.asarray(dw, dtype=float)
    n = dw.shape[0]
    x = np.empty(n + 1)
    x[0] = x0
    noise = 0.0
    for k in range(n):
        noise += math.sqrt(x[k] * (1.0 - x[k])) * dw[k]
        conv = 0.0
        for j in range(k + 1):
            conv += weights[k + 1 - j] * x[j]
        v = offset[k + 1] + conv * dt + noise
        x[k + 1] = min(max(v, 0.0), 1.0)
    return x


def count_chain(keys, n0, m0, rates, masses, horizon, pop_size=0):
    """Gillespie simulation of the block-counting chain on a discrete measure.

    With ``pop_size == 0`` this is the continuous-time dual run to time
    ``horizon``.  With ``pop_size = N`` it is the single-event ancestral chain
    of the discrete model, run for ``horizon`` generations using geometric
    waiting times.  Event ``e`` uses counters ``2e`` (waiting time) and
    ``2e + 1`` (event choice); events are ordered as deactivation into each
    atom, reactivation from each atom, then coalescence.

    Returns ``(n, m, first_wait, n_events)``.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    rates = np.asarray(rates, dtype=float)
    masses = np.asarray(masses, dtype=float)
    reps, n_atoms = keys.shape[0], rates.shape[0]
    c = 0.0
    for i in range(n_atoms):
        c += masses[i]
    merge_factor = (1.0 - c / pop_size) ** 2 if pop_size > 0 else 1.0

    n = np.full(reps, int(n0), dtype=np.int64)
    m = np.tile(np.asarray(m0, dtype=np.int64), (reps, 1)).reshape(reps, n_atoms)
    clock = np.zeros(reps)
    gens = np.zeros(reps, dtype=np.int64)
    first_wait = np.full(reps, np.inf)
    events = np.zeros(reps, dtype=np.int64)
    active = np.ones(reps, dtype=bool)
    idx = np.arange(reps)

    while True:
        a = idx[active]
        if a.size == 0:
            break
        na, ma = n[a], m[a]
        weights = np.empty((a.size, 2 * n_atoms + 1))
        for i in range(n_atoms):
            weights[:, i] = na * masses[i]
        for i in range(n_atoms):
            weights[:, n_atoms + i] = ma[:, i] * rates[i]
        weights[:, 2 * n_atoms] = 0.5 * na * (na - 1) * merge_factor
        total = np.zeros(a.size)
        for col in range(2 * n_atoms + 1):
            total = total + weights[:, col]

        dead = total <= 0.0
        ev = events[a].astype(np.uint64)
        u_wait = uniforms(keys[a], ev * np.uint64(2))
        if pop_size > 0:
            p = total / pop_size
            with np.errstate(divide="ignore", invalid="ignore"):
                wait = np.where(p >= 1.0, 1, np.floor(np.log(u_wait) / np.log1p(-p)) + 1)
            wait = np.where(dead, np.inf, wait)
            reached = gens[a] + wait
            stop = dead | (reached > horizon)
            first_wait[a] = np.where(events[a] == 0, wait, first_wait[a])
            gens[a] = np.where(stop, gens[a], reached)
        else:
            with np.errstate(divide="ignore"):
                wait = np.where(dead, np.inf, -np.log(u_wait) / np.where(dead, 1.0, total))
            reached = clock[a] + wait
            stop = dead | (reached > horizon)
            first_wait[a] = np.where(events[a] == 0, wait, first_wait[a])
            clock[a] = np.where(stop, clock[a], reached)

        go = ~stop
        active[a[stop]] = False
        a, weights, total = a[go], weights[go], total[go]
        if a.size == 0:
            continue
        u_pick = uniforms(keys[a], events[a].astype(np.uint64) * np.uint64(2) + np.uint64(1))
        target = u_pick * total
        acc = np.zeros(a.size)
        choice = np.full(a.size, -1, dtype=np.int64)
        last_pos = np.full(a.size, -1, dtype=np.int64)
        for col in range(2 * n_atoms + 1):
            w = weights[:, col]
            acc = acc + w
            pos = w > 0.0
            last_pos = np.where(pos, col, last_pos)
            hit = pos & (choice < 0) & (target < acc)
            choice[hit] = col
        choice = np.where(choice < 0, last_pos, choice)

        deact = choice < n_atoms
        react = (choice >= n_atoms) & (choice < 2 * n_atoms)
        merge = choice == 2 * n_atoms
        n[a[deact]] -= 1
        m[a[deact], choice[deact]] += 1
        n[a[react]] += 1
        m[a[react], choice[react] - n_atoms] -= 1
        n[a[merge]] -= 1
        events[a] += 1

    return n, m, first_wait, events
