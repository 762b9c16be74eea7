"""PDMP building blocks: states, jump kernels, models and trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .crk import ButcherTableau
from .errors import DomainError, ModelError

__all__ = [
    "PdmpState",
    "DiscreteKernel",
    "ContinuousKernel",
    "JumpKernel",
    "AnalyticSolution",
    "PdmpModel",
    "DenseSegment",
    "AnalyticSegment",
    "Trajectory",
    "eval_dense",
    "sample_jump_height",
    "select_jump",
    "PROB_SUM_TOL",
]

PROB_SUM_TOL = 1e-12


class PdmpState(NamedTuple):
    """``y`` is the continuous component, ``theta`` the jump-bearing one."""

    y: np.ndarray
    theta: np.ndarray

    @classmethod
    def make(cls, y, theta) -> "PdmpState":
        return cls(np.atleast_1d(np.asarray(y, dtype=float)).copy(),
                   np.atleast_1d(np.asarray(theta, dtype=float)).copy())

    @classmethod
    def from_vector(cls, x: np.ndarray, d: int) -> "PdmpState":
        x = np.asarray(x, dtype=float)
        return cls(x[:d].copy(), x[d:].copy())

    def vector(self) -> np.ndarray:
        return np.concatenate([self.y, self.theta])

    def shifted(self, height: np.ndarray) -> "PdmpState":
        """Post-jump state: jumps are additive in every component."""
        d = self.y.size
        return PdmpState(self.y + height[:d], self.theta + height[d:])


class DiscreteKernel:
    """Jump kernel with finitely many heights in a fixed enumeration order.

    Parameters
    ----------
    heights : array_like, shape (K, d + m)
        Candidate jump heights.  The row order defines the inverse-CDF map,
        so it must be the same for every run that is to be compared.
    probabilities : callable
        ``probabilities(state) -> ndarray (K,)`` of point probabilities.
    labels : sequence of str, optional
        Human-readable names for the heights (diagnostics only).
    """

    kind = "discrete"

    def __init__(self, heights, probabilities: Callable[[PdmpState], np.ndarray],
                 labels: Optional[Sequence[str]] = None):
        heights = np.atleast_2d(np.asarray(heights, dtype=float))
        if np.any(np.all(heights == 0.0, axis=1)):
            raise ModelError("a discrete kernel may not contain the zero jump height")
        heights.setflags(write=False)
        self.heights = heights
        self._probabilities = probabilities
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(len(heights)))

    def __len__(self) -> int:
        return self.heights.shape[0]

    def probabilities(self, x: PdmpState) -> np.ndarray:
        p = np.asarray(self._probabilities(x), dtype=float)
        if p.shape != (len(self),):
            raise ModelError(f"expected {len(self)} probabilities, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ModelError("jump probabilities must be finite and non-negative")
        total = float(p.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ModelError(f"jump probabilities sum to {total!r}, not 1")
        return p


class ContinuousKernel:
    """Jump kernel given directly by its inverse-CDF map ``H(x, u)``."""

    kind = "continuous"

    def __init__(self, H: Callable[[PdmpState, float], np.ndarray], lipschitz: float):
        self.H = H
        self.lipschitz = float(lipschitz)


JumpKernel = Union[DiscreteKernel, ContinuousKernel]


def select_jump(kernel: JumpKernel, x: PdmpState, u: float) -> tuple[int, np.ndarray]:
    """Inverse-CDF jump selection; returns ``(index, height)``.

    For a discrete kernel the index ``i`` satisfies
    ``sum(p[:i]) <= u < sum(p[:i+1])``.  Continuous kernels report ``-1``.
    """
    if not 0.0 < u < 1.0:
        raise DomainError(f"u must lie in (0, 1), got {u}")
    if isinstance(kernel, ContinuousKernel):
        return -1, np.asarray(kernel.H(x, u), dtype=float)
    p = kernel.probabilities(x)
    cum = np.cumsum(p)
    i = int(np.searchsorted(cum, u, side="right"))
    if i >= len(p):
        # u above a cumulative sum that rounded below 1
        i = int(np.flatnonzero(p > 0)[-1])
    return i, kernel.heights[i].copy()


def sample_jump_height(kernel: JumpKernel, x: PdmpState, u: float) -> np.ndarray:
    return select_jump(kernel, x, u)[1]


@dataclass(frozen=True)
class AnalyticSolution:
    """Closed-form pieces needed by the exact simulation algorithm.

    ``flow_map(x, tau)`` is the state reached after ``tau`` time units
    without jumps, ``hazard(x, tau)`` the accumulated intensity
    ``int_0^tau lambda``, and ``hazard_inverse(x, c)`` solves
    ``hazard(x, tau) = c`` for ``tau``.
    """

    flow_map: Callable[[PdmpState, float], PdmpState]
    hazard: Callable[[PdmpState, float], float]
    hazard_inverse: Callable[[PdmpState, float], float]


@dataclass(frozen=True, eq=False)
class PdmpModel:
    """The characteristic triple plus phase-space metadata.

    Attributes
    ----------
    flow : callable
        ``flow(state, t) -> ndarray (d + m,)``.  Time enters only through
        piecewise-constant forcing that changes at ``input_breakpoints``.
    intensity : callable
        ``intensity(state, t) -> float``, the jump rate.
    kernel : DiscreteKernel or ContinuousKernel
    d, m : int
        Sizes of the continuous and jump-bearing components.
    x0 : PdmpState
        Initial condition.
    theta_moves : bool
        False when ``theta`` is piecewise constant (its flow block is zero).
    intensity_floor : float, optional
        Declared lower bound for ``intensity``.
    segment_integrator : callable, optional
        Compiled fast path for whole inter-jump segments (see
        :mod:`pdmpsim.kernels`).
    """

    name: str
    flow: Callable[[PdmpState, float], np.ndarray]
    intensity: Callable[[PdmpState, float], float]
    kernel: JumpKernel
    d: int
    m: int
    x0: PdmpState
    input_breakpoints: tuple[float, ...] = ()
    theta_moves: bool = False
    intensity_floor: Optional[float] = None
    contains: Optional[Callable[[PdmpState], bool]] = None
    exact: Optional[AnalyticSolution] = None
    segment_integrator: Optional[Callable[..., Any]] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ModelError("d and m must be positive")
        bps = tuple(float(b) for b in self.input_breakpoints)
        if list(bps) != sorted(bps):
            raise ModelError("input breakpoints must be sorted")
        object.__setattr__(self, "input_breakpoints", bps)
        if self.x0.y.size != self.d or self.x0.theta.size != self.m:
            raise ModelError("initial state does not match (d, m)")

    def with_options(self, **changes) -> "PdmpModel":
        from dataclasses import replace

        return replace(self, **changes)


def _interp_weights(interp: np.ndarray, xi: np.ndarray) -> np.ndarray:
    # interp (s, deg), xi (P,) -> (P, s)
    out = np.zeros((xi.size, interp.shape[0]))
    for k in range(interp.shape[1] - 1, -1, -1):
        out = out * xi[:, None] + interp[:, k][None, :]
    return out


class DenseSegment:
    """Integration record of one inter-jump interval.

    The moving vector ``u`` is ``(y, w)`` when ``theta`` is frozen and
    ``(y, theta, w)`` otherwise; ``w`` is the accumulated hazard.  The
    stage derivatives of every step are retained so the interpolant can be
    evaluated anywhere without re-integration.
    """

    __slots__ = ("tableau", "t_grid", "u_grid", "stage_f", "theta", "d", "m", "t_end")

    def __init__(self, tableau: ButcherTableau, t_grid: np.ndarray, u_grid: np.ndarray,
                 stage_f: np.ndarray, theta: Optional[np.ndarray], d: int, m: int,
                 t_end: Optional[float] = None):
        self.tableau = tableau
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.u_grid = np.asarray(u_grid, dtype=float)
        self.stage_f = np.asarray(stage_f, dtype=float)
        self.theta = None if theta is None else np.asarray(theta, dtype=float)
        self.d = d
        self.m = m
        self.t_end = float(self.t_grid[-1] if t_end is None else t_end)
        if self.stage_f.shape[0] != self.t_grid.size - 1:
            raise ValueError("need one set of stage data per step")

    @property
    def t_start(self) -> float:
        return float(self.t_grid[0])

    @property
    def n_steps(self) -> int:
        return self.t_grid.size - 1

    @property
    def w_grid(self) -> np.ndarray:
        return self.u_grid[:, -1]

    def _locate(self, t: float) -> tuple[int, float]:
        tg = self.t_grid
        if not tg[0] <= t <= tg[-1]:
            raise DomainError(f"t={t} outside segment [{tg[0]}, {tg[-1]}]")
        k = int(np.searchsorted(tg, t, side="right")) - 1
        if k >= self.n_steps:
            return self.n_steps, 0.0
        return k, (t - tg[k]) / (tg[k + 1] - tg[k])

    def eval_u(self, t: float) -> np.ndarray:
        k, xi = self._locate(t)
        if xi == 0.0:
            return self.u_grid[k].copy()
        h = self.t_grid[k + 1] - self.t_grid[k]
        return self.u_grid[k] + h * (self.tableau.b(xi) @ self.stage_f[k])

    def step_data(self, k: int) -> tuple[float, float, np.ndarray, np.ndarray]:
        """``(t_k, h_k, u_k, F_k)`` for step ``k``."""
        return (float(self.t_grid[k]), float(self.t_grid[k + 1] - self.t_grid[k]),
                self.u_grid[k], self.stage_f[k])

    def split_u(self, u: np.ndarray) -> tuple[PdmpState, float]:
        d = self.d
        if self.theta is None:
            return PdmpState(u[:d].copy(), u[d:-1].copy()), float(u[-1])
        return PdmpState(u[:d].copy(), self.theta.copy()), float(u[-1])

    def state_at(self, t: float) -> PdmpState:
        return self.split_u(self.eval_u(t))[0]

    def w_at(self, t: float) -> float:
        return float(self.eval_u(t)[-1])

    def eval_y_many(self, ts: np.ndarray) -> np.ndarray:
        """Vectorised continuous component at sorted times ``ts``; shape (P, d)."""
        ts = np.asarray(ts, dtype=float)
        tg = self.t_grid
        if ts.size and (ts[0] < tg[0] or ts[-1] > tg[-1]):
            raise DomainError("evaluation times outside segment")
        k = np.clip(np.searchsorted(tg, ts, side="right") - 1, 0, self.n_steps - 1) if self.n_steps else np.zeros(ts.size, int)
        if self.n_steps == 0:
            return np.repeat(self.u_grid[:1, : self.d], ts.size, axis=0)
        h = tg[k + 1] - tg[k]
        xi = (ts - tg[k]) / h
        B = _interp_weights(self.tableau.interp, xi)
        # exact grid values and the right end of the last step
        B[xi == 0.0] = 0.0
        B[xi == 1.0] = self.tableau.beta
        Fy = self.stage_f[k][:, :, : self.d]
        return self.u_grid[k, : self.d] + h[:, None] * np.einsum("ps,psq->pq", B, Fy)

    def theta_at(self, t: float) -> np.ndarray:
        if self.theta is not None:
            return self.theta.copy()
        return self.state_at(t).theta


class AnalyticSegment:
    """Exact flow from ``x_start`` on ``[t_start, t_end]``."""

    __slots__ = ("t_start", "t_end", "x_start", "_flow_map", "_hazard")

    def __init__(self, t_start: float, t_end: float, x_start: PdmpState,
                 flow_map: Callable[[PdmpState, float], PdmpState],
                 hazard: Optional[Callable[[PdmpState, float], float]] = None):
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        self.x_start = x_start
        self._flow_map = flow_map
        self._hazard = hazard

    def w_at(self, t: float) -> float:
        if self._hazard is None:
            return float("nan")
        return float(self._hazard(self.x_start, t - self.t_start))

    def state_at(self, t: float) -> PdmpState:
        if t == self.t_start:
            return PdmpState(self.x_start.y.copy(), self.x_start.theta.copy())
        return self._flow_map(self.x_start, t - self.t_start)

    def eval_y_many(self, ts: np.ndarray) -> np.ndarray:
        return np.array([self.state_at(float(t)).y for t in ts]).reshape(len(ts), -1)


Segment = Union[DenseSegment, AnalyticSegment]


@dataclass
class Trajectory:
    """Output of a simulation run.

    ``jump_times[0] == 0`` and ``post_jump_states[0]`` is the initial
    state; entries ``n >= 1`` describe the ``n``-th jump.  ``segments[n]``
    covers ``[jump_times[n], jump_times[n+1]]`` (the last one runs to or
    past the horizon).  When the run was asked for a minimum number of
    jumps, jumps after the horizon may be recorded too.
    """

    jump_times: np.ndarray
    post_jump_states: list
    pre_jump_states: list
    height_indices: list
    segments: list
    horizon: float
    draws_consumed: int
    d: int
    m: int
    meta: dict = field(default_factory=dict)

    @property
    def n_jumps(self) -> int:
        """Number of recorded jumps (including any past the horizon)."""
        return len(self.jump_times) - 1

    @property
    def n_jumps_in_horizon(self) -> int:
        return int(np.count_nonzero(self.jump_times[1:] < self.horizon))

    def segment_index(self, t: float) -> int:
        return int(np.searchsorted(self.jump_times, t, side="right")) - 1

    def state_at(self, t: float) -> PdmpState:
        return eval_dense(self, t)

    def eval_y_many(self, ts: np.ndarray) -> np.ndarray:
        """Continuous component at many times in ``[0, horizon]``; shape (P, d)."""
        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < 0 or ts.max() > self.horizon):
            raise DomainError("evaluation times outside [0, horizon]")
        order = np.argsort(ts, kind="stable")
        seg = np.searchsorted(self.jump_times, ts[order], side="right") - 1
        out = np.empty((ts.size, self.d))
        bounds = np.flatnonzero(np.diff(seg)) + 1
        for chunk in np.split(np.arange(ts.size), bounds):
            if chunk.size == 0:
                continue
            s = self.segments[seg[chunk[0]]]
            out[order[chunk]] = s.eval_y_many(ts[order[chunk]])
        return out


def eval_dense(traj: Trajectory, t: float) -> PdmpState:
    """State of the (approximate) path at time ``t``; right-continuous at jumps."""
    if not 0.0 <= t <= traj.horizon:
        raise DomainError(f"t={t} outside [0, {traj.horizon}]")
    n = traj.segment_index(t)
    if not traj.segments:
        raise DomainError("trajectory was recorded without dense output")
    if t == traj.jump_times[n]:
        x = traj.post_jump_states[n]
        return PdmpState(x.y.copy(), x.theta.copy())
    return traj.segments[n].state_at(t)
