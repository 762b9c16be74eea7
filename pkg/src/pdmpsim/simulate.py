"""Trajectory generators.

Uniform ``U_{2n-1}`` (0-based stream index ``2n-2``) sets the hazard
threshold of the ``n``-th inter-jump interval and ``U_{2n}`` (index
``2n-1``) selects the ``n``-th jump height, so every generator driven by the
same stream realises the same path up to discretisation error.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import AnalyticSegment, PdmpModel, PdmpState, Trajectory, select_jump
from .crk import ButcherTableau, Method, builtin_tableau
from .errors import DomainError, NumericalError, UnsupportedModelError
from .hitting import CapReached, integrate_until_threshold
from .rng import UniformSource

__all__ = [
    "SimulationConfig",
    "simulate_approx",
    "simulate_exact_analytic",
    "simulate_reference",
    "REFERENCE_H",
    "DEFAULT_MAX_JUMPS",
]

log = logging.getLogger(__name__)

REFERENCE_H = 5e-6
DEFAULT_MAX_JUMPS = 10**6


@dataclass(frozen=True)
class SimulationConfig:
    """Controls for one approximate run.

    ``min_jumps`` keeps simulating past the horizon until that many jumps
    have been recorded, so the run can be paired jump-by-jump with a
    reference.
    """

    method: str = Method.LOBATTO_IIIA_3.value
    h: float = 1e-3
    horizon: float = 1.0
    seed: int = 0
    min_jumps: Optional[int] = None
    record_dense: bool = True
    max_jumps: int = DEFAULT_MAX_JUMPS
    use_fast: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"h must be positive, got {self.h}")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.min_jumps is not None and self.min_jumps < 0:
            raise DomainError("min_jumps must be non-negative")
        Method.parse(self.method)

    @property
    def tableau(self) -> ButcherTableau:
        return builtin_tableau(self.method)


def _threshold(stream: UniformSource, n: int) -> float:
    return -math.log(stream.uniform_at(2 * n - 2))


def _check_pre_jump(model: PdmpModel, x: PdmpState, t: float, n: int) -> None:
    """Reject a diverged pre-jump state; warn when the intensity dips below its floor."""
    with np.errstate(over="ignore", invalid="ignore"):
        lam = model.intensity(x, t)
    if not (np.all(np.isfinite(x.vector())) and math.isfinite(lam) and lam > 0):
        raise NumericalError("state at the crossing has no finite positive intensity",
                             jump=n, t=t, intensity=lam)
    if model.intensity_floor is not None and lam < model.intensity_floor:
        log.warning("intensity %.6g below declared floor %.6g at jump %d (t=%.6g)",
                    lam, model.intensity_floor, n, t)


def simulate_approx(model: PdmpModel, cfg: SimulationConfig, stream: UniformSource,
                    tableau: Optional[ButcherTableau] = None) -> Trajectory:
    """Approximate path: continuous RK integration with random-threshold event location.

    Parameters
    ----------
    model : PdmpModel
    cfg : SimulationConfig
    stream : UniformSource
        Read by index only; the same stream can be reused across runs.
    tableau : ButcherTableau, optional
        Overrides ``cfg.method`` (e.g. for user-defined tableaus).
    """
    tab = tableau if tableau is not None else cfg.tableau
    T = cfg.horizon
    min_jumps = cfg.min_jumps or 0
    x = model.x0
    times = [0.0]
    posts = [PdmpState(x.y.copy(), x.theta.copy())]
    pres, idxs, segments = [], [], []
    n = 1
    t_prev = 0.0
    while True:
        if n > cfg.max_jumps:
            raise NumericalError("jump budget exhausted", n=n, t_prev=t_prev)
        need_more = (n - 1) < min_jumps
        if not need_more and t_prev >= T:
            # the horizon is already covered by earlier segments
            break
        t_cap = math.inf if need_more else T
        thr = _threshold(stream, n)
        try:
            res = integrate_until_threshold(model, tab, x, thr, cfg.h, t_prev, t_cap,
                                            use_fast=cfg.use_fast)
        except NumericalError as exc:
            raise exc.annotate(jump=n, t_prev=t_prev)
        if isinstance(res, CapReached):
            segments.append(res.segment)
            break
        if res.t_hit >= T and not need_more:
            segments.append(res.segment)
            break
        pre = res.state_at_crossing
        _check_pre_jump(model, pre, res.t_hit, n)
        i, height = select_jump(model.kernel, pre, stream.uniform_at(2 * n - 1))
        post = pre.shifted(height)
        if model.contains is not None:
            assert model.contains(post), f"post-jump state left the phase space at jump {n}"
        segments.append(res.segment)
        times.append(res.t_hit)
        pres.append(pre)
        posts.append(post)
        idxs.append(i)
        x, t_prev = post, res.t_hit
        n += 1

    if not cfg.record_dense:
        segments = []
    return Trajectory(
        jump_times=np.array(times), post_jump_states=posts, pre_jump_states=pres,
        height_indices=idxs, segments=segments, horizon=T, draws_consumed=2 * (n - 1),
        d=model.d, m=model.m,
        meta={"model": model.name, "method": tab.name, "h": cfg.h, "seed": cfg.seed},
    )


def simulate_exact_analytic(model: PdmpModel, horizon: float, stream: UniformSource,
                            min_jumps: Optional[int] = None,
                            max_jumps: int = DEFAULT_MAX_JUMPS) -> Trajectory:
    """Exact path for models with closed-form flow and hazard inverse."""
    if model.exact is None:
        raise UnsupportedModelError(f"model {model.name!r} has no analytic flow/hazard inverse")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    ex = model.exact
    T = float(horizon)
    min_jumps = min_jumps or 0
    x = model.x0
    times = [0.0]
    posts = [PdmpState(x.y.copy(), x.theta.copy())]
    pres, idxs, segments = [], [], []
    n = 1
    t_prev = 0.0
    while True:
        if n > max_jumps:
            raise NumericalError("jump budget exhausted", n=n, t_prev=t_prev)
        need_more = (n - 1) < min_jumps
        if not need_more and t_prev >= T:
            break
        tau = float(ex.hazard_inverse(x, _threshold(stream, n)))
        t_hit = t_prev + tau
        if t_hit >= T and not need_more:
            segments.append(AnalyticSegment(t_prev, max(t_hit, T), x, ex.flow_map, ex.hazard))
            break
        pre = ex.flow_map(x, tau)
        i, height = select_jump(model.kernel, pre, stream.uniform_at(2 * n - 1))
        post = pre.shifted(height)
        segments.append(AnalyticSegment(t_prev, t_hit, x, ex.flow_map, ex.hazard))
        times.append(t_hit)
        pres.append(pre)
        posts.append(post)
        idxs.append(i)
        x, t_prev = post, t_hit
        n += 1
    return Trajectory(
        jump_times=np.array(times), post_jump_states=posts, pre_jump_states=pres,
        height_indices=idxs, segments=segments, horizon=T, draws_consumed=2 * (n - 1),
        d=model.d, m=model.m, meta={"model": model.name, "method": "analytic"},
    )


def simulate_reference(model: PdmpModel, horizon: float, stream: UniformSource,
                       h_ref: float = REFERENCE_H, method: str = Method.LOBATTO_IIIA_3.value,
                       min_jumps: Optional[int] = None, use_fast: bool = True) -> Trajectory:
    """High-accuracy approximate path used as the comparator when no analytic path exists."""
    seed = getattr(stream, "seed", 0)
    cfg = SimulationConfig(method=method, h=h_ref, horizon=horizon, seed=seed,
                           min_jumps=min_jumps, use_fast=use_fast)
    traj = simulate_approx(model, cfg, stream)
    traj.meta["reference"] = True
    return traj
