# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inter-jump segment loop for Hodgkin-Huxley models.

With the channel configuration frozen, the membrane equation is affine in
``y`` between stimulus breakpoints, ``y' = alpha * y + b(t)``.  The stage
equations are therefore linear and one Newton step from any start is
exact; the kernel solves the ``s x s`` system directly.  The accumulated
hazard only needs the stage values of ``y``.

Must stay step-for-step identical to ``_kernels_py.py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, fabs, isfinite

cnp.import_array()

cdef int CROSSED = 0, CAP = 1, NONFINITE = 2, NONMONOTONE = 3, NEWTON_FAIL = 4, MAX_STEPS = 5


cdef inline double xexpm1(double z) nogil:
    if z == 0.0:
        return 1.0
    return z / expm1(z)


cdef inline double hazard_rate(int rate_set, const double[:] coef, double y) nogil:
    cdef double a_m, b_m, a_h, b_h, a_n, b_n
    if rate_set == 1:
        a_n = 0.1 * xexpm1((10.0 - y) / 10.0)
        a_m = xexpm1((25.0 - y) / 10.0)
        a_h = 0.07 * exp(-y / 20.0)
        b_n = 0.125 * exp(-y / 80.0)
        b_m = 4.0 * exp(-y / 18.0)
        b_h = 1.0 / (exp((30.0 - y) / 10.0) + 1.0)
    else:
        a_m = 1.872 * 6.06 * xexpm1((25.41 - y) / 6.06)
        a_h = 0.549 * 9.06 * xexpm1((y + 27.74) / 9.06)
        b_m = 3.973 * 9.41 * xexpm1((y - 21.001) / 9.41)
        b_h = 22.57 / (1.0 + exp((56.0 - y) / 12.5))
        a_n = 0.0
        b_n = 0.0
    return (coef[0] * a_m + coef[1] * b_m + coef[2] * a_h + coef[3] * b_h
            + coef[4] * a_n + coef[5] * b_n)


cdef int solve_small(double[:, :] M, double[:] rhs, int s) nogil:
    """Gaussian elimination with partial pivoting, in place; result in rhs."""
    cdef int i, j, k, piv
    cdef double best, tmp, f
    for k in range(s):
        piv = k
        best = fabs(M[k, k])
        for i in range(k + 1, s):
            if fabs(M[i, k]) > best:
                best = fabs(M[i, k])
                piv = i
        if best == 0.0:
            return 1
        if piv != k:
            for j in range(s):
                tmp = M[k, j]
                M[k, j] = M[piv, j]
                M[piv, j] = tmp
            tmp = rhs[k]
            rhs[k] = rhs[piv]
            rhs[piv] = tmp
        for i in range(k + 1, s):
            f = M[i, k] / M[k, k]
            if f != 0.0:
                for j in range(k, s):
                    M[i, j] -= f * M[k, j]
                rhs[i] -= f * rhs[k]
    for i in range(s - 1, -1, -1):
        tmp = rhs[i]
        for j in range(i + 1, s):
            tmp -= M[i, j] * rhs[j]
        rhs[i] = tmp / M[i, i]
    return 0


def hh_segment(const double[:, :] A, const double[:] beta, const double[:] c, const double[:] coef,
               double g_tot, double e_tot, double C, double amp, double t_on, double t_off,
               int rate_set, double y0, double t0, double h, double threshold, double t_cap,
               const double[:] breakpoints, long max_steps, double snap):
    """Integrate ``(y, w)`` from ``(y0, 0)`` at ``t0`` until ``w >= threshold`` or ``t >= t_cap``.

    Returns ``(status, t_grid, u_grid, stage_f)``.
    """
    cdef int s = A.shape[0]
    cdef int i, j, n_bp = breakpoints.shape[0], bp_i = 0, at_bp, bad
    cdef long cap = 64, n = 0, k = 0
    cdef double t = t0, t_base = t0, t_nom, t_next, hs, y = y0, w = 0.0
    cdef double alpha = -g_tot / C, bconst, tmid, y_new, w_new, tiny = 4.0 * 2.220446049250313e-16
    cdef double[:, :] M = np.empty((s, s))
    cdef double[:] K = np.empty(s)
    cdef int status = CAP

    while bp_i < n_bp and breakpoints[bp_i] <= t0:
        bp_i += 1

    t_arr = np.empty(cap + 1)
    u_arr = np.empty((cap + 1, 2))
    f_arr = np.empty((cap, s, 2))
    cdef double[:] tg = t_arr
    cdef double[:, :] ug = u_arr
    cdef double[:, :, :] fg = f_arr
    tg[0] = t
    ug[0, 0] = y
    ug[0, 1] = 0.0

    while True:
        if n >= max_steps:
            status = MAX_STEPS
            break
        t_nom = t_base + (k + 1) * h
        at_bp = bp_i < n_bp and breakpoints[bp_i] <= t_nom + snap * h
        t_next = breakpoints[bp_i] if at_bp else t_nom
        hs = t_next - t
        tmid = t + 0.5 * hs
        bconst = e_tot / C
        if t_on < tmid <= t_off:
            bconst = (e_tot + amp) / C

        # (I - hs alpha A) K = y + hs b A 1
        for i in range(s):
            K[i] = 0.0
            for j in range(s):
                M[i, j] = -hs * alpha * A[i, j]
                K[i] += A[i, j]
            M[i, i] += 1.0
            K[i] = y + hs * bconst * K[i]
        if solve_small(M, K, s):
            status = NEWTON_FAIL
            break

        if n >= cap:
            cap *= 2
            t_arr = np.resize(t_arr, cap + 1)
            u_arr = np.resize(u_arr, (cap + 1, 2))
            f_arr = np.resize(f_arr, (cap, s, 2))
            tg = t_arr
            ug = u_arr
            fg = f_arr

        y_new = y
        w_new = w
        bad = 0
        for i in range(s):
            fg[n, i, 0] = alpha * K[i] + bconst
            fg[n, i, 1] = hazard_rate(rate_set, coef, K[i])
            if not (isfinite(fg[n, i, 0]) and isfinite(fg[n, i, 1])):
                bad = 1
        for i in range(s):
            y_new += hs * beta[i] * fg[n, i, 0]
        for i in range(s):
            w_new += hs * beta[i] * fg[n, i, 1]
        if bad or not (isfinite(y_new) and isfinite(w_new)):
            status = NONFINITE
            break
        if w_new < w or (w_new == w and hs > tiny * max(1.0, fabs(t))):
            status = NONMONOTONE
            break
        n += 1
        tg[n] = t_next
        ug[n, 0] = y_new
        ug[n, 1] = w_new
        y = y_new
        w = w_new
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

    return status, t_arr[: n + 1].copy(), u_arr[: n + 1].copy(), f_arr[:n].copy()
