# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_fallback.py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, log1p, cos, exp, expm1, floor, INFINITY
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t counter) noexcept nogil:
    cdef uint64_t bits = _mix64(key + (counter + 1) * GOLDEN)
    return (<double>(bits >> 11) + 0.5) * TWO_M53


cdef inline double _normal(uint64_t key, uint64_t index) noexcept nogil:
    cdef double u1 = _uniform(key, 2 * index)
    cdef double u2 = _uniform(key, 2 * index + 1)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef inline double _clamp(double v) noexcept nogil:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def em_ensemble(keys, double x0, y0, rates, masses, double dt, Py_ssize_t n_steps, record_steps):
    cdef const uint64_t[:] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef const double[:] lam = np.ascontiguousarray(rates, dtype=np.float64)
    cdef const double[:] cm = np.ascontiguousarray(masses, dtype=np.float64)
    cdef const double[:] yinit = np.ascontiguousarray(y0, dtype=np.float64).reshape(-1)
    cdef const int64_t[:] rec = np.ascontiguousarray(record_steps, dtype=np.int64)
    cdef Py_ssize_t reps = k.shape[0], n_atoms = lam.shape[0], n_rec = rec.shape[0]
    out_arr = np.empty((reps, n_rec, 1 + n_atoms))
    cdef double[:, :, :] out = out_arr
    gain_arr = -np.expm1(-np.asarray(lam) * dt)
    cdef double[:] gain = gain_arr
    y_arr = np.empty(n_atoms)
    cdef double[:] y = y_arr
    cdef double sqdt = sqrt(dt), x, x_new, drift, dw
    cdef Py_ssize_t r, i, j, step
    with nogil:
        for r in range(reps):
            x = x0
            for i in range(n_atoms):
                y[i] = yinit[i]
            j = 0
            while j < n_rec and rec[j] == 0:
                out[r, j, 0] = x
                for i in range(n_atoms):
                    out[r, j, 1 + i] = y[i]
                j += 1
            for step in range(n_steps):
                dw = sqdt * _normal(k[r], step)
                drift = 0.0
                for i in range(n_atoms):
                    drift = drift + cm[i] * (y[i] - x)
                x_new = _clamp(x + drift * dt + sqrt(x * (1.0 - x)) * dw)
                for i in range(n_atoms):
                    y[i] = _clamp(y[i] + gain[i] * (x - y[i]))
                x = x_new
                while j < n_rec and rec[j] == step + 1:
                    out[r, j, 0] = x
                    for i in range(n_atoms):
                        out[r, j, 1 + i] = y[i]
                    j += 1
    return out_arr


def em_path(double x0, y0, rates, masses, double dt, dw):
    cdef const double[:] lam = np.ascontiguousarray(rates, dtype=np.float64)
    cdef const double[:] cm = np.ascontiguousarray(masses, dtype=np.float64)
    cdef const double[:] noise = np.ascontiguousarray(dw, dtype=np.float64)
    cdef Py_ssize_t n_atoms = lam.shape[0], n = noise.shape[0], i, kk
    out_arr = np.empty((n + 1, 1 + n_atoms))
    cdef double[:, :] out = out_arr
    y_arr = np.ascontiguousarray(y0, dtype=np.float64).reshape(-1).copy()
    cdef double[:] y = y_arr
    gain_arr = -np.expm1(-np.asarray(lam) * dt)
    cdef double[:] gain = gain_arr
    cdef double x = x0, x_new, drift
    with nogil:
        out[0, 0] = x
        for i in range(n_atoms):
            out[0, 1 + i] = y[i]
        for kk in range(n):
            drift = 0.0
            for i in range(n_atoms):
                drift = drift + cm[i] * (y[i] - x)
            x_new = _clamp(x + drift * dt + sqrt(x * (1.0 - x)) * noise[kk])
            for i in range(n_atoms):
                y[i] = _clamp(y[i] + gain[i] * (x - y[i]))
            x = x_new
            out[kk + 1, 0] = x
            for i in range(n_atoms):
                out[kk + 1, 1 + i] = y[i]
    return out_arr


def sve_path(double x0, offset, weights, double dt, dw):
    cdef const double[:] g = np.ascontiguousarray(offset, dtype=np.float64)
    cdef const double[:] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:] noise = np.ascontiguousarray(dw, dtype=np.float64)
    cdef Py_ssize_t n = noise.shape[0], kk, j
    x_arr = np.empty(n + 1)
    cdef double[:] x = x_arr
    cdef double acc = 0.0, conv
    with nogil:
        x[0] = x0
        for kk in range(n):
            acc = acc + sqrt(x[kk] * (1.0 - x[kk])) * noise[kk]
            conv = 0.0
            for j in range(kk + 1):
                conv = conv + w[kk + 1 - j] * x[j]
            x[kk + 1] = _clamp(g[kk + 1] + conv * dt + acc)
    return x_arr


def count_chain(keys, n0, m0, rates, masses, double horizon, int64_t pop_size=0):
    cdef const uint64_t[:] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef const double[:] lam = np.ascontiguousarray(rates, dtype=np.float64)
    cdef const double[:] cm = np.ascontiguousarray(masses, dtype=np.float64)
    cdef const int64_t[:] minit = np.ascontiguousarray(m0, dtype=np.int64).reshape(-1)
    cdef Py_ssize_t reps = k.shape[0], n_atoms = lam.shape[0], n_ev = 2 * n_atoms + 1
    n_arr = np.empty(reps, dtype=np.int64)
    m_arr = np.empty((reps, n_atoms), dtype=np.int64)
    fw_arr = np.full(reps, np.inf)
    ev_arr = np.zeros(reps, dtype=np.int64)
    w_arr = np.empty(n_ev)
    cdef int64_t[:] n_out = n_arr
    cdef int64_t[:, :] m = m_arr
    cdef double[:] first_wait = fw_arr
    cdef int64_t[:] events = ev_arr
    cdef double[:] w = w_arr
    cdef int64_t n, nstart = n0, e
    cdef double c = 0.0, merge_factor = 1.0, total, clock, wait, target, acc, p, u
    cdef double gens
    cdef Py_ssize_t r, i, choice, last_pos
    for i in range(n_atoms):
        c += cm[i]
    if pop_size > 0:
        merge_factor = (1.0 - c / pop_size) ** 2
    with nogil:
        for r in range(reps):
            n = nstart
            for i in range(n_atoms):
                m[r, i] = minit[i]
            clock = 0.0
            gens = 0.0
            e = 0
            while True:
                for i in range(n_atoms):
                    w[i] = n * cm[i]
                for i in range(n_atoms):
                    w[n_atoms + i] = m[r, i] * lam[i]
                w[2 * n_atoms] = 0.5 * n * (n - 1) * merge_factor
                total = 0.0
                for i in range(n_ev):
                    total = total + w[i]
                if total <= 0.0:
                    if e == 0:
                        first_wait[r] = INFINITY
                    break
                u = _uniform(k[r], 2 * e)
                if pop_size > 0:
                    p = total / pop_size
                    if p >= 1.0:
                        wait = 1.0
                    else:
                        wait = floor(log(u) / log1p(-p)) + 1.0
                    if e == 0:
                        first_wait[r] = wait
                    if gens + wait > horizon:
                        break
                    gens = gens + wait
                else:
                    wait = -log(u) / total
                    if e == 0:
                        first_wait[r] = wait
                    if clock + wait > horizon:
                        break
                    clock = clock + wait
                target = _uniform(k[r], 2 * e + 1) * total
                acc = 0.0
                choice = -1
                last_pos = -1
                for i in range(n_ev):
                    acc = acc + w[i]
                    if w[i] > 0.0:
                        last_pos = i
                        if choice < 0 and target < acc:
                            choice = i
                if choice < 0:
                    choice = last_pos
                if choice < n_atoms:
                    n -= 1
                    m[r, choice] += 1
                elif choice < 2 * n_atoms:
                    n += 1
                    m[r, choice - n_atoms] -= 1
                else:
                    n -= 1
                e += 1
            n_out[r] = n
            events[r] = e
    return n_arr, m_arr, fw_arr, ev_arr
