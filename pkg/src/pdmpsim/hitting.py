"""Random-threshold hitting times of the accumulated hazard.

Between jumps the state ``(y, theta)`` is integrated together with the
accumulated hazard ``w`` (``w' = lambda``, ``w(0) = 0``).  The next jump
happens when ``w`` reaches ``-log U``.  Integration proceeds in fixed steps;
once a grid value of ``w`` reaches the threshold, the crossing is located
inside that step on the dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import crk
from .core import DenseSegment, PdmpModel, PdmpState
from .crk import ButcherTableau
from .errors import DomainError, NumericalError, StepError

__all__ = [
    "CrossingResult",
    "CapReached",
    "integrate_until_threshold",
    "find_crossing_in_step",
    "SCAN_POINTS",
    "BISECT_ITERS",
    "DEFAULT_MAX_STEPS",
]

SCAN_POINTS = 8
BISECT_ITERS = 60
DEFAULT_MAX_STEPS = 10**8
# a breakpoint this close (relative to h) past a nominal grid point is landed on
BREAKPOINT_SNAP = 1e-9

# status codes shared with the segment kernels
CROSSED, CAP, NONFINITE, NONMONOTONE, NEWTON_FAIL, MAX_STEPS = range(6)


@dataclass
class CrossingResult:
    """Threshold crossing found inside the last step of ``segment``."""

    tau_hat: float
    t_hit: float
    xi: float
    segment: DenseSegment
    state_at_crossing: PdmpState
    w_at_crossing: float


@dataclass
class CapReached:
    """No crossing before ``t_cap``; ``segment`` covers at least ``[t_offset, t_cap]``."""

    segment: DenseSegment


SegmentOutcome = Union[CrossingResult, CapReached]


def find_crossing_in_step(tableau: ButcherTableau, stage_data: np.ndarray, w_left: float,
                          h: float, threshold: float, w_right: Optional[float] = None) -> float:
    """Leftmost ``xi`` in (0, 1] where the in-step hazard interpolant hits ``threshold``.

    ``g(xi) = w(xi) - threshold`` is sampled at ``xi = j/8``; the first
    bracket with a sign change is bisected.

    Parameters
    ----------
    stage_data : ndarray
        Stage derivatives of the step, either the full ``(s, q)`` array
        (hazard in the last column) or just the hazard column ``(s,)``.
    w_right : float, optional
        Stored grid value at the end of the step; used for ``g(1)`` so the
        result agrees with the grid-based crossing test bit for bit.
    """
    fw = np.asarray(stage_data, dtype=float)
    if fw.ndim == 2:
        fw = fw[:, -1]
    if w_right is None:
        w_right = w_left + h * float(tableau.beta @ fw)
    # w(xi) - w_left as a scalar polynomial in xi, highest degree first
    coefs = [float(v) for v in (h * (fw @ tableau.interp))[::-1]]

    def g(xi: float) -> float:
        if xi == 1.0:
            return w_right - threshold
        acc = 0.0
        for a in coefs:
            acc = acc * xi + a
        return (w_left + acc) - threshold

    if not w_left < threshold:
        raise DomainError("threshold must lie above the left grid value")
    if not g(1.0) >= 0.0:
        raise DomainError("threshold not reached within the step")
    lo = 0.0
    for j in range(1, SCAN_POINTS + 1):
        xi = j / SCAN_POINTS
        gj = g(xi)
        if gj >= 0.0:
            if gj == 0.0:
                return xi
            hi = xi
            break
        lo = xi
    else:  # pragma: no cover - excluded by the g(1) check above
        raise NumericalError("no sign change found in step", w_left=w_left, threshold=threshold)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def _augmented_rhs(model: PdmpModel, theta: np.ndarray, t_eval: float):
    d, m = model.d, model.m
    flow, intensity = model.flow, model.intensity
    if model.theta_moves:
        def rhs(_t, u):
            x = PdmpState(u[:d], u[d:d + m])
            out = np.empty(d + m + 1)
            out[:-1] = flow(x, t_eval)
            out[-1] = intensity(x, t_eval)
            return out
    else:
        def rhs(_t, u):
            x = PdmpState(u[:d], theta)
            out = np.empty(d + 1)
            out[:d] = flow(x, t_eval)[:d]
            out[d] = intensity(x, t_eval)
            return out
    return rhs


def integrate_segment_generic(model: PdmpModel, tableau: ButcherTableau, x0: PdmpState,
                              threshold: float, h: float, t_offset: float, t_cap: float,
                              max_steps: int = DEFAULT_MAX_STEPS):
    """Reference implementation of the segment loop on arbitrary models.

    Returns ``(status, t_grid, u_grid, stage_f)`` with the same meaning as
    the compiled kernels in :mod:`pdmpsim.kernels`.
    """
    if model.theta_moves:
        u = np.concatenate([x0.y, x0.theta, [0.0]])
    else:
        u = np.concatenate([x0.y, [0.0]])
    bps = [b for b in model.input_breakpoints if b > t_offset]
    bp_i = 0
    t_base, k = t_offset, 0
    t = t_offset
    ts, us, fs = [t], [u], []
    status = CAP
    tiny = 4.0 * np.finfo(float).eps
    while True:
        if len(fs) >= max_steps:
            status = MAX_STEPS
            break
        t_nom = t_base + (k + 1) * h
        at_bp = bp_i < len(bps) and bps[bp_i] <= t_nom + BREAKPOINT_SNAP * h
        t_next = bps[bp_i] if at_bp else t_nom
        hs = t_next - t
        rhs = _augmented_rhs(model, x0.theta, t + 0.5 * hs)
        try:
            F = crk.solve_stages(tableau, rhs, t, u, hs)
        except StepError:
            status = NEWTON_FAIL
            break
        u_new = u + hs * (tableau.beta @ F)
        if not np.all(np.isfinite(u_new)) or not np.all(np.isfinite(F)):
            status = NONFINITE
            break
        if u_new[-1] < u[-1] or (u_new[-1] == u[-1] and hs > tiny * max(1.0, abs(t))):
            status = NONMONOTONE
            break
        ts.append(t_next)
        us.append(u_new)
        fs.append(F)
        u = u_new
        if u[-1] >= threshold:
            status = CROSSED
            break
        if at_bp:
            t_base, k = t_next, 0
            bp_i += 1
        else:
            k += 1
        t = t_next
        if t >= t_cap:
            status = CAP
            break
    q = u.size
    stage_f = np.array(fs).reshape(len(fs), tableau.s, q)
    return status, np.array(ts), np.array(us).reshape(len(us), q), stage_f


def integrate_until_threshold(model: PdmpModel, tableau: ButcherTableau, x0: PdmpState,
                              threshold: float, h: float, t_offset: float, t_cap: float,
                              *, use_fast: bool = True,
                              max_steps: int = DEFAULT_MAX_STEPS) -> SegmentOutcome:
    """Integrate the augmented system from ``(x0, w=0)`` until ``w`` hits ``threshold``.

    Steps of size ``h`` start at ``t_offset``; they are shortened to land on
    input breakpoints, and the grid restarts there.  If the absolute time
    reaches ``t_cap`` first, :class:`CapReached` is returned with the partial
    record.

    Raises
    ------
    NumericalError
        On non-finite values, a decreasing hazard, Newton failure, or when
        ``max_steps`` is exhausted.
    """
    if not threshold > 0 or not math.isfinite(threshold):
        raise DomainError(f"threshold must be positive and finite, got {threshold}")
    if not h > 0:
        raise DomainError(f"h must be positive, got {h}")
    if not t_cap > t_offset:
        raise DomainError("t_cap must exceed t_offset")

    fast = model.segment_integrator if (use_fast and not model.theta_moves) else None
    if fast is not None:
        status, t_grid, u_grid, stage_f = fast(tableau, x0.theta, x0.y, t_offset, h,
                                               threshold, t_cap, max_steps)
    else:
        status, t_grid, u_grid, stage_f = integrate_segment_generic(
            model, tableau, x0, threshold, h, t_offset, t_cap, max_steps)

    theta = None if model.theta_moves else x0.theta.copy()
    if status not in (CROSSED, CAP):
        t_fail = float(t_grid[-1])
        msg = {
            NONFINITE: "non-finite state during integration",
            NONMONOTONE: "accumulated hazard failed to increase",
            NEWTON_FAIL: "implicit stage equations did not converge",
            MAX_STEPS: "step budget exhausted before crossing",
        }[status]
        cls = StepError if status == NEWTON_FAIL else NumericalError
        raise cls(msg, t=t_fail, h=h, steps=int(stage_f.shape[0]))

    segment = DenseSegment(tableau, t_grid, u_grid, stage_f, theta, model.d, model.m)
    if status == CAP:
        return CapReached(segment)

    k = segment.n_steps - 1
    t_k, h_k, u_k, F_k = segment.step_data(k)
    xi = find_crossing_in_step(tableau, F_k, float(u_k[-1]), h_k, threshold,
                               w_right=float(u_grid[-1, -1]))
    u_hit = crk.dense_step_eval(tableau, F_k, u_k, h_k, xi)
    t_hit = t_k + xi * h_k if xi < 1.0 else float(t_grid[-1])
    segment.t_end = t_hit
    state, w_hit = segment.split_u(u_hit)
    return CrossingResult(tau_hat=t_hit - t_offset, t_hit=t_hit, xi=xi, segment=segment,
                          state_at_crossing=state, w_at_crossing=w_hit)
