# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: breakpoint searches for the rank-one prox and direct circular convolution.

Interface mirrors ``_pykernels``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

NAME = "cython"

cdef double EXACT_RTOL = 1e-12


cdef inline double _shrink1(double z, double t) noexcept nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


cdef inline bint _exact(double lhs, double rhs) noexcept nogil:
    cdef double s = fabs(lhs)
    if fabs(rhs) > s:
        s = fabs(rhs)
    if s < 1e-300:
        s = 1e-300
    return fabs(lhs - rhs) <= EXACT_RTOL * s


cdef double _probe(double lo, double hi) noexcept nogil:
    if lo == -INFINITY and hi == INFINITY:
        return 0.0
    if lo == -INFINITY:
        return hi - (1.0 + fabs(hi))
    if hi == INFINITY:
        return lo + (1.0 + fabs(lo))
    return 0.5 * (lo + hi)


cdef double _solve_piece(double sigma, const double[::1] u, const double[::1] xc,
                         double thr, double rhs, double lo, double hi) noexcept nogil:
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double p = _probe(lo, hi)
    cdef double c = 0.0, b = 0.0, z, ui
    for i in range(n):
        ui = u[i]
        if ui == 0.0:
            continue
        z = xc[i] + p * ui
        if z > thr:
            c += ui * (xc[i] - thr)
            b += ui * ui
        elif z < -thr:
            c += ui * (xc[i] + thr)
            b += ui * ui
    return (rhs - c) / (b - sigma)


def solve_piece(double sigma, const double[::1] u, const double[::1] xc, double thr,
                double rhs, double lo, double hi):
    return _solve_piece(sigma, u, xc, thr, rhs, lo, hi)


cdef double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


def prox_sorted(double sigma, const double[::1] u, const double[::1] xc, double thr):
    """Sorted sweep; ``lhs = C + S*mu`` is updated per crossing. Returns ``(mu, pieces_visited)``."""
    cdef Py_ssize_t n = u.shape[0], i, j, jj, n_i = 0, ci
    for i in range(n):
        if u[i] != 0.0:
            n_i += 1
    if n_i == 0:
        return 0.0, 0

    values_arr = np.empty(2 * n_i, dtype=np.float64)
    signed_arr = np.empty(2 * n_i, dtype=np.int64)
    cdef double[::1] values = values_arr
    cdef cnp.int64_t[::1] signed = signed_arr
    cdef double c = 0.0, s = -sigma, ui, usq, v, lhs, prev = -INFINITY
    j = 0
    for i in range(n):
        ui = u[i]
        if ui != 0.0:
            values[j] = (thr - xc[i]) / ui
            signed[j] = i + 1
            values[n_i + j] = (-thr - xc[i]) / ui
            signed[n_i + j] = -(i + 1)
            j += 1
            # far left every coordinate is outside the band, on the side opposite to sgn(u_i)
            if ui > 0:
                c += ui * (xc[i] + thr)
            else:
                c += ui * (xc[i] - thr)
            s += ui * ui
    cdef cnp.intp_t[::1] order = np.lexsort((signed_arr, values_arr))
    cdef double rhs = _dot(u, xc)
    cdef Py_ssize_t found = -1

    with nogil:
        for jj in range(2 * n_i):
            j = order[jj]
            v = values[j]
            ci = signed[j]
            # +bp: z_i = thr; -bp: z_i = -thr. Entering or leaving depends on sgn(u_i).
            if ci > 0:
                ci = ci - 1
                ui = u[ci]
                usq = ui * ui
                if ui > 0:
                    c += ui * (xc[ci] - thr)
                    s += usq
                else:
                    c -= ui * (xc[ci] - thr)
                    s -= usq
            else:
                ci = -ci - 1
                ui = u[ci]
                usq = ui * ui
                if ui > 0:
                    c -= ui * (xc[ci] + thr)
                    s -= usq
                else:
                    c += ui * (xc[ci] + thr)
                    s += usq
            lhs = c + s * v
            if lhs <= rhs:
                found = jj
                break
            prev = v
    if found < 0:
        return _solve_piece(sigma, u, xc, thr, rhs, prev, INFINITY), 2 * n_i
    if _exact(lhs, rhs):
        return v, found + 1
    return _solve_piece(sigma, u, xc, thr, rhs, prev, v), found + 1


# ---- deterministic linear-time selection (median of medians) on parallel arrays ----

cdef inline void _swap(double* v, Py_ssize_t* c, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double tv = v[a]
    cdef Py_ssize_t tc = c[a]
    v[a] = v[b]
    c[a] = c[b]
    v[b] = tv
    c[b] = tc


cdef Py_ssize_t _partition5(double* v, Py_ssize_t* c, Py_ssize_t left, Py_ssize_t right,
                            long long* cmp) noexcept nogil:
    cdef Py_ssize_t i = left + 1, j
    while i <= right:
        j = i
        while j > left:
            cmp[0] += 1
            if v[j - 1] > v[j]:
                _swap(v, c, j - 1, j)
                j -= 1
            else:
                break
        i += 1
    return (left + right) // 2


cdef Py_ssize_t _partition(double* v, Py_ssize_t* c, Py_ssize_t left, Py_ssize_t right,
                           Py_ssize_t pivot_index, Py_ssize_t k, long long* cmp) noexcept nogil:
    cdef double pv = v[pivot_index]
    cdef Py_ssize_t i, store, store_eq
    _swap(v, c, pivot_index, right)
    store = left
    for i in range(left, right):
        cmp[0] += 1
        if v[i] < pv:
            _swap(v, c, store, i)
            store += 1
    store_eq = store
    for i in range(store, right):
        cmp[0] += 1
        if v[i] == pv:
            _swap(v, c, store_eq, i)
            store_eq += 1
    _swap(v, c, right, store_eq)
    if k < store:
        return store
    if k <= store_eq:
        return k
    return store_eq


cdef Py_ssize_t _pivot(double* v, Py_ssize_t* c, Py_ssize_t left, Py_ssize_t right,
                       long long* cmp) noexcept nogil:
    cdef Py_ssize_t i, sub_right, m5
    if right - left < 5:
        return _partition5(v, c, left, right, cmp)
    i = left
    while i <= right:
        sub_right = i + 4
        if sub_right > right:
            sub_right = right
        m5 = _partition5(v, c, i, sub_right, cmp)
        _swap(v, c, m5, left + (i - left) // 5)
        i += 5
    return _select(v, c, left, left + (right - left) // 5, left + (right - left) // 10, cmp)


cdef Py_ssize_t _select(double* v, Py_ssize_t* c, Py_ssize_t left, Py_ssize_t right,
                        Py_ssize_t k, long long* cmp) noexcept nogil:
    cdef Py_ssize_t p
    while True:
        if left == right:
            return left
        p = _pivot(v, c, left, right, cmp)
        p = _partition(v, c, left, right, p, k, cmp)
        if k == p:
            return k
        elif k < p:
            right = p - 1
        else:
            left = p + 1


def select_kth(double[::1] values, Py_ssize_t k):
    """Reorder ``values`` in place so index ``k`` holds its k-th smallest; return (value, comparisons)."""
    cdef Py_ssize_t n = values.shape[0]
    if not 0 <= k < n:
        raise IndexError("k out of range")
    coords_arr = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] coords = coords_arr
    cdef long long cmp = 0
    cdef Py_ssize_t pos = _select(&values[0], &coords[0], 0, n - 1, k, &cmp)
    return values[pos], cmp


def prox_median(double sigma, const double[::1] u, const double[::1] xc, double thr):
    """Halving search driven by median-of-medians selection.

    Returns ``(mu, rounds, work)``; ``work`` counts comparisons plus the
    element visits spent evaluating and partitioning.
    """
    cdef Py_ssize_t n = u.shape[0], i, j, k, new_k, f, n_i = 0, rounds = 0
    for i in range(n):
        if u[i] != 0.0:
            n_i += 1
    if n_i == 0:
        return 0.0, 0, 0

    ui_arr = np.empty(n_i)
    xi_arr = np.empty(n_i)
    lo_arr = np.empty(n_i)
    hi_arr = np.empty(n_i)
    vals_arr = np.empty(2 * n_i)
    coord_arr = np.empty(2 * n_i, dtype=np.intp)
    live_arr = np.full(n_i, 2, dtype=np.intp)
    stamp_arr = np.zeros(n_i, dtype=np.intp)
    cdef double[::1] ui = ui_arr, xi = xi_arr, lo_bp = lo_arr, hi_bp = hi_arr, vals = vals_arr
    cdef Py_ssize_t[::1] coord = coord_arr, live = live_arr, stamp = stamp_arr
    cdef double a, b
    j = 0
    for i in range(n):
        if u[i] != 0.0:
            ui[j] = u[i]
            xi[j] = xc[i]
            a = (thr - xc[i]) / u[i]
            b = (-thr - xc[i]) / u[i]
            vals[j] = a
            vals[n_i + j] = b
            coord[j] = j
            coord[n_i + j] = j
            lo_bp[j] = a if a < b else b
            hi_bp[j] = b if a < b else a
            j += 1

    cdef double rhs = _dot(u, xc)
    cdef double const = 0.0, slope = 0.0, lo = -INFINITY, hi = INFINITY
    cdef double m, lhs, acc, state
    cdef long long work = 0
    cdef bint go_up
    k = 2 * n_i
    with nogil:
        while k > 0:
            rounds += 1
            j = _select(&vals[0], &coord[0], 0, k - 1, k // 2, &work)
            m = vals[j]
            acc = 0.0
            for j in range(k):
                f = coord[j]
                if stamp[f] != rounds:
                    stamp[f] = rounds
                    acc += ui[f] * _shrink1(xi[f] + m * ui[f], thr)
            work += k
            lhs = const + (slope - sigma) * m + acc
            if _exact(lhs, rhs):
                break
            go_up = lhs > rhs
            if go_up:
                lo = m
            else:
                hi = m
            new_k = 0
            for j in range(k):
                if (go_up and vals[j] > m) or ((not go_up) and vals[j] < m):
                    vals[new_k] = vals[j]
                    coord[new_k] = coord[j]
                    new_k += 1
                else:
                    f = coord[j]
                    live[f] -= 1
                    if live[f] == 0:
                        if hi_bp[f] <= lo:
                            state = 1.0 if ui[f] > 0 else -1.0
                        elif lo_bp[f] >= hi:
                            state = -1.0 if ui[f] > 0 else 1.0
                        else:
                            state = 0.0
                        if state != 0.0:
                            const += ui[f] * (xi[f] - thr * state)
                            slope += ui[f] * ui[f]
            work += k
            k = new_k
    if k > 0:
        return m, rounds, work
    return _solve_piece(sigma, u, xc, thr, rhs, lo, hi), rounds, work


def circ_conv(const double[::1] kernel, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i, j, idx
    out = np.zeros(n)
    cdef double[::1] y = out
    cdef double kj
    with nogil:
        for j in range(n):
            kj = kernel[j]
            if kj == 0.0:
                continue
            for i in range(n):
                idx = i - j
                if idx < 0:
                    idx += n
                y[i] += kj * x[idx]
    return out


def circ_corr(const double[::1] kernel, const double[::1] y):
    cdef Py_ssize_t n = y.shape[0], i, j, idx
    out = np.zeros(n)
    cdef double[::1] x = out
    cdef double kj
    with nogil:
        for j in range(n):
            kj = kernel[j]
            if kj == 0.0:
                continue
            for i in range(n):
                idx = i + j
                if idx >= n:
                    idx -= n
                x[i] += kj * y[idx]
    return out
