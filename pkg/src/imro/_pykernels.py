"""Numpy implementations of the hot kernels.

Same interface as the compiled ``_ckernels`` module, which is preferred when
it is importable. Both breakpoint searches return the multiplier ``mu``;
the caller forms ``x = shrink(xc + mu*u, thr)``.
"""

import numpy as np

NAME = "python"
_EXACT_RTOL = 1e-12


def _probe(lo, hi):
    if np.isinf(lo) and np.isinf(hi):
        return 0.0
    if np.isinf(lo):
        return hi - (1.0 + abs(hi))
    if np.isinf(hi):
        return lo + (1.0 + abs(lo))
    return 0.5 * (lo + hi)


def solve_piece(sigma, u, xc, thr, rhs, lo, hi):
    """Solve the multiplier equation on a breakpoint-free interval ``(lo, hi)``."""
    z = xc + _probe(lo, hi) * u
    pos = z > thr
    neg = z < -thr
    const = u[pos] @ (xc[pos] - thr) + u[neg] @ (xc[neg] + thr)
    slope = u[pos] @ u[pos] + u[neg] @ u[neg]
    return (rhs - const) / (slope - sigma)


def _shrink(y, t):
    return np.sign(y) * np.maximum(np.abs(y) - t, 0.0)


def _exact(lhs, rhs):
    return abs(lhs - rhs) <= _EXACT_RTOL * max(abs(lhs), abs(rhs), 1e-300)


def prox_sorted(sigma, u, xc, thr):
    """Sorted sweep over all breakpoints. Returns ``(mu, pieces_visited)``.

    On each piece ``lhs(mu) = C + S*mu`` where ``C`` and ``S`` sum over the
    coordinates outside the zero band. Crossing a breakpoint moves one term
    in or out of those sums; the term vanishes at its own breakpoint, so
    ``lhs`` is evaluated there as ``C + S*v`` with no accumulated drift even
    when tiny ``u_i`` push breakpoints far out.
    """
    idx = np.flatnonzero(u)
    n_i = idx.size
    if n_i == 0:
        return 0.0, 0
    ui = u[idx]
    xi = xc[idx]
    up = ui > 0
    usq = ui * ui
    t_plus = ui * (xi - thr)
    t_minus = ui * (xi + thr)
    # left of every breakpoint all coordinates sit outside the band
    c0 = float(t_minus[up].sum() + t_plus[~up].sum())
    s0 = float(usq.sum()) - sigma

    values = np.concatenate(((thr - xi) / ui, (-thr - xi) / ui))
    signed = np.concatenate((idx + 1, -(idx + 1)))
    d_c = np.concatenate((np.where(up, t_plus, -t_plus), np.where(up, -t_minus, t_minus)))
    d_s = np.concatenate((np.where(up, usq, -usq), np.where(up, -usq, usq)))
    order = np.lexsort((signed, values))
    v = values[order]
    lhs_at = c0 + np.cumsum(d_c[order]) + (s0 + np.cumsum(d_s[order])) * v

    rhs = float(u @ xc)
    hit = np.flatnonzero(lhs_at <= rhs)
    if hit.size == 0:
        return solve_piece(sigma, u, xc, thr, rhs, v[-1], np.inf), 2 * n_i
    j = int(hit[0])
    if _exact(lhs_at[j], rhs):
        return float(v[j]), j + 1
    lo = v[j - 1] if j > 0 else -np.inf
    return solve_piece(sigma, u, xc, thr, rhs, lo, v[j]), j + 1


def prox_median(sigma, u, xc, thr):
    """Halving search using linear-time selection.

    Returns ``(mu, rounds, work)`` where ``work`` counts element visits
    across selection, evaluation and partitioning.
    """
    idx = np.flatnonzero(u)
    n_i = idx.size
    if n_i == 0:
        return 0.0, 0, 0
    ui = u[idx]
    xi = xc[idx]
    bp_plus = (thr - xi) / ui
    bp_minus = (-thr - xi) / ui
    lo_bp = np.minimum(bp_plus, bp_minus)
    hi_bp = np.maximum(bp_plus, bp_minus)
    vals = np.concatenate((bp_plus, bp_minus))
    coord = np.concatenate((np.arange(n_i), np.arange(n_i)))
    live = np.full(n_i, 2, dtype=np.int64)
    sgn = np.sign(ui)

    rhs = float(u @ xc)
    const = 0.0
    slope = 0.0
    lo, hi = -np.inf, np.inf
    rounds = 0
    work = 0
    while vals.size:
        k = vals.size
        m = float(np.partition(vals, k // 2)[k // 2])
        uc = ui[coord]
        z = _shrink(xi[coord] + m * uc, thr)
        lhs = const + (slope - sigma) * m + float(np.sum(uc * z / live[coord]))
        rounds += 1
        work += 3 * k
        if _exact(lhs, rhs):
            return m, rounds, work
        if lhs > rhs:
            lo = m
            keep = vals > m
        else:
            hi = m
            keep = vals < m
        drop = coord[~keep]
        np.subtract.at(live, drop, 1)
        fixed = np.unique(drop[live[drop] == 0])
        if fixed.size:
            state = np.where(hi_bp[fixed] <= lo, sgn[fixed], np.where(lo_bp[fixed] >= hi, -sgn[fixed], 0.0))
            on = state != 0
            f = fixed[on]
            const += float(ui[f] @ (xi[f] - thr * state[on]))
            slope += float(ui[f] @ ui[f])
        vals = vals[keep]
        coord = coord[keep]
    return solve_piece(sigma, u, xc, thr, rhs, lo, hi), rounds, work


def circ_conv(kernel, x):
    """``y[i] = sum_j kernel[j] * x[(i - j) mod n]``."""
    y = np.zeros_like(x)
    for j in np.flatnonzero(kernel):
        y += kernel[j] * np.roll(x, j)
    return y


def circ_corr(kernel, y):
    """Adjoint of :func:`circ_conv`."""
    x = np.zeros_like(y)
    for j in np.flatnonzero(kernel):
        x += kernel[j] * np.roll(y, -j)
    return x
