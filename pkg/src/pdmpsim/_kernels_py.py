"""Pure-Python twin of the compiled segment kernel in ``_kernels.pyx``.

Used when the extension is not built.  The arithmetic is kept in the same
order as the compiled version so both produce the same grid.
"""

from __future__ import annotations

import math

import numpy as np

CROSSED, CAP, NONFINITE, NONMONOTONE, NEWTON_FAIL, MAX_STEPS = range(6)
_TINY = 4.0 * 2.220446049250313e-16


def _xexpm1(z: float) -> float:
    if z == 0.0:
        return 1.0
    return z / math.expm1(z)


def hazard_rate(rate_set: int, coef, y: float) -> float:
    exp = math.exp
    if rate_set == 1:
        a_n = 0.1 * _xexpm1((10.0 - y) / 10.0)
        a_m = _xexpm1((25.0 - y) / 10.0)
        a_h = 0.07 * exp(-y / 20.0)
        b_n = 0.125 * exp(-y / 80.0)
        b_m = 4.0 * exp(-y / 18.0)
        b_h = 1.0 / (exp((30.0 - y) / 10.0) + 1.0)
    else:
        a_m = 1.872 * 6.06 * _xexpm1((25.41 - y) / 6.06)
        a_h = 0.549 * 9.06 * _xexpm1((y + 27.74) / 9.06)
        b_m = 3.973 * 9.41 * _xexpm1((y - 21.001) / 9.41)
        b_h = 22.57 / (1.0 + exp((56.0 - y) / 12.5))
        a_n = 0.0
        b_n = 0.0
    return (coef[0] * a_m + coef[1] * b_m + coef[2] * a_h + coef[3] * b_h
            + coef[4] * a_n + coef[5] * b_n)


def solve_small(M: list, rhs: list, s: int) -> int:
    """Gaussian elimination with partial pivoting, in place; result in ``rhs``."""
    for k in range(s):
        piv = k
        best = abs(M[k][k])
        for i in range(k + 1, s):
            if abs(M[i][k]) > best:
                best = abs(M[i][k])
                piv = i
        if best == 0.0:
            return 1
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
            rhs[k], rhs[piv] = rhs[piv], rhs[k]
        for i in range(k + 1, s):
            f = M[i][k] / M[k][k]
            if f != 0.0:
                for j in range(k, s):
                    M[i][j] -= f * M[k][j]
                rhs[i] -= f * rhs[k]
    for i in range(s - 1, -1, -1):
        tmp = rhs[i]
        for j in range(i + 1, s):
            tmp -= M[i][j] * rhs[j]
        rhs[i] = tmp / M[i][i]
    return 0


def hh_segment(A, beta, c, coef, g_tot, e_tot, C, amp, t_on, t_off, rate_set, y0, t0, h,
               threshold, t_cap, breakpoints, max_steps, snap):
    """Integrate ``(y, w)`` from ``(y0, 0)`` at ``t0`` until ``w >= threshold`` or ``t >= t_cap``.

    Returns ``(status, t_grid, u_grid, stage_f)``.
    """
    A = [[float(v) for v in row] for row in np.asarray(A)]
    beta = [float(v) for v in beta]
    coef = [float(v) for v in coef]
    bps = [float(b) for b in breakpoints]
    s = len(A)
    alpha = -g_tot / C
    t = t_base = t0
    y, w = y0, 0.0
    n = k = 0
    bp_i = 0
    while bp_i < len(bps) and bps[bp_i] <= t0:
        bp_i += 1
    ts, us, fs = [t], [(y, 0.0)], []
    status = CAP
    isfinite = math.isfinite

    while True:
        if n >= max_steps:
            status = MAX_STEPS
            break
        t_nom = t_base + (k + 1) * h
        at_bp = bp_i < len(bps) and bps[bp_i] <= t_nom + snap * h
        t_next = bps[bp_i] if at_bp else t_nom
        hs = t_next - t
        tmid = t + 0.5 * hs
        bconst = e_tot / C
        if t_on < tmid <= t_off:
            bconst = (e_tot + amp) / C

        M = [[-hs * alpha * A[i][j] for j in range(s)] for i in range(s)]
        K = [0.0] * s
        for i in range(s):
            acc = 0.0
            for j in range(s):
                acc += A[i][j]
            M[i][i] += 1.0
            K[i] = y + hs * bconst * acc
        if solve_small(M, K, s):
            status = NEWTON_FAIL
            break

        F = [(alpha * K[i] + bconst, hazard_rate(rate_set, coef, K[i])) for i in range(s)]
        bad = not all(isfinite(a) and isfinite(b) for a, b in F)
        y_new, w_new = y, w
        for i in range(s):
            y_new += hs * beta[i] * F[i][0]
        for i in range(s):
            w_new += hs * beta[i] * F[i][1]
        if bad or not (isfinite(y_new) and isfinite(w_new)):
            status = NONFINITE
            break
        if w_new < w or (w_new == w and hs > _TINY * max(1.0, abs(t))):
            status = NONMONOTONE
            break
        n += 1
        ts.append(t_next)
        us.append((y_new, w_new))
        fs.append(F)
        y, w = y_new, w_new
        if w >= threshold:
            status = CROSSED
            break
        if at_bp:
            t_base = t_next
            k = 0
            bp_i += 1
        else:
            k += 1
        t = t_next
        if t >= t_cap:
            status = CAP
            break

    stage_f = np.array(fs, dtype=float).reshape(len(fs), s, 2)
    return status, np.array(ts), np.array(us, dtype=float).reshape(len(us), 2), stage_f
