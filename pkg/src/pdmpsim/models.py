"""Concrete PDMPs: stochastic Hodgkin-Huxley membranes and analytic toy models.

Hodgkin-Huxley state layout
---------------------------
``y`` is the membrane potential (mV, relative to rest).  ``theta`` has 13
components counting channels per kinetic state: entries 0-7 are the sodium
states 1-8 (state ``1 + k + 4*h`` has ``k`` open m-gates and ``h`` open
h-gates, state 8 conducts), entries 8-12 are the potassium states 9-13
(state ``9 + k`` has ``k`` open n-gates, state 13 conducts).

Every jump moves one channel along one edge of a kinetic scheme.  The edge
list ``HH_EDGES`` fixes the enumeration order used for inverse-CDF height
selection.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .core import (AnalyticSolution, ContinuousKernel, DiscreteKernel, PdmpModel,
                   PdmpState)
from .errors import DomainError, ModelError

__all__ = [
    "RateSet",
    "HHParams",
    "hh_rates",
    "HH_EDGES",
    "build_hh_model",
    "build_frozen_hh_flow",
    "hh_stationary_theta",
    "ToyKind",
    "build_toy_model",
    "MODEL_IDS",
    "get_model",
]

log = logging.getLogger(__name__)


class RateSet(str, enum.Enum):
    P1 = "P1"
    P2 = "P2"


def _xexpm1(z):
    """``z / (exp(z) - 1)`` with the removable singularity at 0 filled by 1."""
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        den = np.expm1(z)
        out = np.where(z == 0.0, 1.0, z / np.where(z == 0.0, 1.0, den))
    return out if out.ndim else float(out)


# rate tuple order: (a_m, b_m, a_h, b_h, a_n, b_n)
RATE_NAMES = ("a_m", "b_m", "a_h", "b_h", "a_n", "b_n")


def hh_rates(rate_set, y):
    """Voltage-dependent gate transition rates (1/ms).

    Parameters
    ----------
    rate_set : RateSet or str
        ``"P1"`` (squid giant axon) or ``"P2"`` (sodium-only neuron).
    y : float or ndarray
        Membrane potential in mV.

    Returns
    -------
    tuple
        ``(a_m, b_m, a_h, b_h, a_n, b_n)``; for P2 the potassium rates are 0.
    """
    rs = RateSet(rate_set)
    y = np.asarray(y, dtype=float)
    if rs is RateSet.P1:
        a_n = 0.1 * _xexpm1((10.0 - y) / 10.0)
        a_m = _xexpm1((25.0 - y) / 10.0)
        a_h = 0.07 * np.exp(-y / 20.0)
        b_n = 0.125 * np.exp(-y / 80.0)
        b_m = 4.0 * np.exp(-y / 18.0)
        b_h = 1.0 / (np.exp((30.0 - y) / 10.0) + 1.0)
    else:
        a_m = 1.872 * 6.06 * _xexpm1((25.41 - y) / 6.06)
        a_h = 0.549 * 9.06 * _xexpm1((y + 27.74) / 9.06)
        b_m = 3.973 * 9.41 * _xexpm1((y - 21.001) / 9.41)
        b_h = 22.57 / (1.0 + np.exp((56.0 - y) / 12.5))
        a_n = np.zeros_like(y)
        b_n = np.zeros_like(y)
    out = (a_m, b_m, a_h, b_h, a_n, b_n)
    if y.ndim == 0:
        return tuple(float(r) for r in out)
    return out


# (from_state, to_state, rate index into RATE_NAMES, multiplicity); 1-based states
HH_EDGES: tuple[tuple[int, int, int, int], ...] = (
    # sodium, m-gate opening
    (1, 2, 0, 3), (2, 3, 0, 2), (3, 4, 0, 1),
    (5, 6, 0, 3), (6, 7, 0, 2), (7, 8, 0, 1),
    # sodium, m-gate closing
    (2, 1, 1, 1), (3, 2, 1, 2), (4, 3, 1, 3),
    (6, 5, 1, 1), (7, 6, 1, 2), (8, 7, 1, 3),
    # sodium, h-gate opening / closing
    (1, 5, 2, 1), (2, 6, 2, 1), (3, 7, 2, 1), (4, 8, 2, 1),
    (5, 1, 3, 1), (6, 2, 3, 1), (7, 3, 3, 1), (8, 4, 3, 1),
    # potassium, n-gate opening / closing
    (9, 10, 4, 4), (10, 11, 4, 3), (11, 12, 4, 2), (12, 13, 4, 1),
    (10, 9, 5, 1), (11, 10, 5, 2), (12, 11, 5, 3), (13, 12, 5, 4),
)

_N_THETA = 13
_EDGE_FROM = np.array([e[0] - 1 for e in HH_EDGES])
_EDGE_RATE = np.array([e[2] for e in HH_EDGES])
_EDGE_MULT = np.array([e[3] for e in HH_EDGES], dtype=float)


def _edge_heights() -> np.ndarray:
    H = np.zeros((len(HH_EDGES), 1 + _N_THETA))
    for k, (i, j, _, _) in enumerate(HH_EDGES):
        H[k, i] = -1.0
        H[k, j] = 1.0
    return H


def _edge_label(e) -> str:
    return f"{e[0]}->{e[1]} ({RATE_NAMES[e[2]]} x{e[3]})"


def rate_coefficients(theta: np.ndarray) -> np.ndarray:
    """Per-rate weights so that ``lambda = coef @ rates`` for frozen ``theta``."""
    coef = np.zeros(6)
    np.add.at(coef, _EDGE_RATE, _EDGE_MULT * np.asarray(theta, dtype=float)[_EDGE_FROM])
    return coef


@dataclass(frozen=True)
class HHParams:
    """Constants of a Hodgkin-Huxley membrane patch.

    Conductances are per channel for sodium and potassium and per unit area
    for the leak; the stimulus is ``input_amplitude`` on ``(input_on, input_off]``.
    """

    E_Na: float
    g_Na: float
    N_Na: int
    E_K: float
    g_K: float
    N_K: int
    E_L: float
    g_L: float
    C: float
    input_amplitude: float
    input_on: float
    input_off: float
    rate_set: str = RateSet.P1.value
    y0: float = 0.0

    def __post_init__(self):
        RateSet(self.rate_set)
        if self.N_Na < 0 or self.N_K < 0:
            raise ModelError("channel counts must be non-negative")
        if int(self.N_Na) != self.N_Na or int(self.N_K) != self.N_K:
            raise ModelError("channel counts must be integers")
        if not self.C > 0:
            raise ModelError("membrane capacitance must be positive")
        if self.input_off < self.input_on:
            raise ModelError("stimulus must switch off after it switches on")

    @classmethod
    def p1(cls) -> "HHParams":
        return cls(E_Na=115.0, g_Na=4.0, N_Na=300, E_K=-12.0, g_K=18.0, N_K=30,
                   E_L=0.0, g_L=0.3, C=1.0, input_amplitude=30.0, input_on=1.0,
                   input_off=2.0, rate_set="P1")

    @classmethod
    def p2(cls) -> "HHParams":
        return cls(E_Na=144.0, g_Na=2.569e-5, N_Na=1000, E_K=0.0, g_K=0.0, N_K=0,
                   E_L=0.0, g_L=1.0 / 1953.49e3, C=0.0714e-6, input_amplitude=35.1e-6,
                   input_on=0.1, input_off=0.2, rate_set="P2")

    def with_overrides(self, **overrides) -> "HHParams":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ModelError(f"unknown HH parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)

    def current(self, t: float) -> float:
        return self.input_amplitude if self.input_on < t <= self.input_off else 0.0

    def kernel_params(self) -> np.ndarray:
        """Packed constants for the compiled segment kernels."""
        return np.array([self.E_Na, self.g_Na, self.E_K, self.g_K, self.E_L, self.g_L,
                         self.C, self.input_amplitude, self.input_on, self.input_off])


def _binomial_split(n_total: int, probs: np.ndarray) -> np.ndarray:
    # largest-remainder rounding of n_total * probs to integers summing to n_total
    target = n_total * probs
    base = np.floor(target)
    short = int(n_total - base.sum())
    order = np.argsort(-(target - base), kind="stable")
    base[order[:short]] += 1
    return base


def hh_stationary_theta(params: HHParams, y: Optional[float] = None) -> np.ndarray:
    """Channel counts closest to the stationary distribution at fixed potential ``y``."""
    y = params.y0 if y is None else y
    a_m, b_m, a_h, b_h, a_n, b_n = hh_rates(params.rate_set, y)
    m = a_m / (a_m + b_m)
    hg = a_h / (a_h + b_h)
    na = np.array([math.comb(3, k) * m**k * (1 - m) ** (3 - k) * (hg if ho else 1 - hg)
                   for ho in (0, 1) for k in range(4)])
    if a_n + b_n > 0:
        n = a_n / (a_n + b_n)
        kk = np.array([math.comb(4, k) * n**k * (1 - n) ** (4 - k) for k in range(5)])
    else:
        kk = np.eye(5)[0]
    return np.concatenate([_binomial_split(int(params.N_Na), na),
                           _binomial_split(int(params.N_K), kk)])


def _intensity_floor(params: HHParams) -> float:
    ys = np.linspace(min(params.E_K, params.E_L, params.y0) - 20.0,
                     max(params.E_Na, params.y0) + 20.0, 2001)
    a_m, b_m, a_h, b_h, a_n, b_n = hh_rates(params.rate_set, ys)
    na_out = np.stack([3 * a_m + a_h, 2 * a_m + b_m + a_h, a_m + 2 * b_m + a_h, 3 * b_m + a_h,
                       3 * a_m + b_h, 2 * a_m + b_m + b_h, a_m + 2 * b_m + b_h, 3 * b_m + b_h])
    k_out = np.stack([4 * a_n, 3 * a_n + b_n, 2 * a_n + 2 * b_n, a_n + 3 * b_n, 4 * b_n])
    return float(np.min(params.N_Na * na_out.min(axis=0) + params.N_K * k_out.min(axis=0)))


def build_hh_model(params: Optional[HHParams] = None, rate_set: Optional[str] = None,
                   *, theta0: Optional[np.ndarray] = None) -> PdmpModel:
    """Stochastic Hodgkin-Huxley PDMP (d = 1, m = 13).

    Parameters
    ----------
    params : HHParams, optional
        Defaults to ``HHParams.p1()`` or ``HHParams.p2()`` depending on
        ``rate_set``.
    rate_set : {"P1", "P2"}, optional
        Overrides ``params.rate_set``.
    theta0 : array_like, optional
        Initial channel counts; by default the stationary configuration at
        the resting potential.
    """
    if params is None:
        params = HHParams.p2() if rate_set == "P2" else HHParams.p1()
    if rate_set is not None and RateSet(rate_set).value != params.rate_set:
        params = replace(params, rate_set=RateSet(rate_set).value)
    p = params
    rs = RateSet(p.rate_set)

    def flow(x: PdmpState, t: float) -> np.ndarray:
        y, th = x.y[0], x.theta
        dy = (-p.g_Na * th[7] * (y - p.E_Na) - p.g_K * th[12] * (y - p.E_K)
              - p.g_L * (y - p.E_L) + p.current(t)) / p.C
        out = np.zeros(1 + _N_THETA)
        out[0] = dy
        return out

    def edge_weights(x: PdmpState) -> np.ndarray:
        rates = np.asarray(hh_rates(rs, x.y[0]))
        return _EDGE_MULT * rates[_EDGE_RATE] * x.theta[_EDGE_FROM]

    def intensity(x: PdmpState, t: float) -> float:
        return float(edge_weights(x).sum())

    def probabilities(x: PdmpState) -> np.ndarray:
        w = edge_weights(x)
        return w / w.sum()

    def contains(x: PdmpState) -> bool:
        th = x.theta
        return bool(np.all(np.isfinite(x.y)) and np.all(th >= 0) and np.all(th == np.round(th))
                    and th[:8].sum() == p.N_Na and th[8:].sum() == p.N_K)

    if theta0 is None:
        theta0 = hh_stationary_theta(p)
    x0 = PdmpState.make([p.y0], theta0)
    if not contains(x0):
        raise ModelError("initial channel configuration does not match the channel counts")

    from . import kernels  # local import: kernels depends on this module's constants

    kernel = DiscreteKernel(_edge_heights(), probabilities, [_edge_label(e) for e in HH_EDGES])
    breakpoints = tuple(sorted({p.input_on, p.input_off}))
    return PdmpModel(
        name=f"hh-{rs.value.lower()}",
        flow=flow,
        intensity=intensity,
        kernel=kernel,
        d=1,
        m=_N_THETA,
        x0=x0,
        input_breakpoints=breakpoints,
        theta_moves=False,
        intensity_floor=_intensity_floor(p),
        contains=contains,
        segment_integrator=kernels.hh_segment_integrator(p),
        metadata={"params": p},
    )


def build_frozen_hh_flow(params: Optional[HHParams] = None, theta: Optional[np.ndarray] = None,
                         intensity: float = 1e-3) -> PdmpModel:
    """HH membrane equation with the channel configuration held fixed.

    Jumps are governed by a small constant ``intensity`` instead of the
    channel kinetics, so a single small uniform keeps the whole horizon
    jump-free and the run reduces to a plain ODE solve.  The flow is affine
    in ``y`` between stimulus breakpoints, so the exact solution is
    available in closed form (see ``affine_solution``).
    """
    p = params or HHParams.p1()
    th = hh_stationary_theta(p) if theta is None else np.asarray(theta, dtype=float)
    hh = build_hh_model(p, theta0=th)
    lam = float(intensity)
    if not lam > 0:
        raise ModelError("intensity must be positive")

    def const_intensity(x: PdmpState, t: float) -> float:
        return lam

    kernel = DiscreteKernel(_edge_heights()[:1], lambda x: np.ones(1), ["dummy"])
    return PdmpModel(
        name="hh-frozen",
        flow=hh.flow,
        intensity=const_intensity,
        kernel=kernel,
        d=1,
        m=_N_THETA,
        x0=hh.x0,
        input_breakpoints=hh.input_breakpoints,
        intensity_floor=lam,
        metadata={"params": p, "theta": th.copy()},
    )


def affine_solution(params: HHParams, theta: np.ndarray, y0: float, t: float) -> float:
    """Closed-form potential at time ``t`` for frozen ``theta`` starting at ``y0``, ``t0 = 0``."""
    g = params.g_Na * theta[7] + params.g_K * theta[12] + params.g_L
    e = params.g_Na * theta[7] * params.E_Na + params.g_K * theta[12] * params.E_K + params.g_L * params.E_L
    pieces = sorted({0.0, params.input_on, params.input_off, t})
    y = y0
    for a, b in zip(pieces[:-1], pieces[1:]):
        if b > t:
            break
        mid = 0.5 * (a + b)
        y_inf = (e + params.current(mid)) / g
        y = y_inf + (y - y_inf) * math.exp(-g / params.C * (b - a))
    return y


class ToyKind(str, enum.Enum):
    CONST_RATE = "const-rate"
    QUADRATIC_HAZARD = "quad-hazard"
    PURE_MARKOV_CHAIN = "markov3"
    EXP_HAZARD = "exp-hazard"


MARKOV3_GENERATOR = np.array([[-3.0, 1.0, 2.0],
                              [0.5, -1.0, 0.5],
                              [2.0, 2.0, -4.0]])


def _const_rate() -> PdmpModel:
    rate = 2.0

    def flow(x, t):
        return np.zeros(2)

    def flow_map(x, tau):
        return PdmpState(x.y.copy(), x.theta.copy())

    return PdmpModel(
        name=ToyKind.CONST_RATE.value,
        flow=flow,
        intensity=lambda x, t: rate,
        kernel=DiscreteKernel([[0.0, 1.0]], lambda x: np.ones(1), ["count"]),
        d=1, m=1,
        x0=PdmpState.make([0.0], [0.0]),
        intensity_floor=rate,
        exact=AnalyticSolution(flow_map, lambda x, tau: rate * tau, lambda x, c: c / rate),
        metadata={"rate": rate},
    )


def _quad_hazard() -> PdmpModel:
    # y' = 1, lambda = y; each jump resets y to 1 and counts in theta
    def flow(x, t):
        return np.array([1.0, 0.0])

    def flow_map(x, tau):
        return PdmpState(x.y + tau, x.theta.copy())

    def hazard(x, tau):
        return x.y[0] * tau + 0.5 * tau * tau

    def hazard_inverse(x, c):
        y = x.y[0]
        # root of tau^2/2 + y tau - c, cancellation-free form
        return 2.0 * c / (y + math.sqrt(y * y + 2.0 * c))

    return PdmpModel(
        name=ToyKind.QUADRATIC_HAZARD.value,
        flow=flow,
        intensity=lambda x, t: float(x.y[0]),
        kernel=ContinuousKernel(lambda x, u: np.array([1.0 - x.y[0], 1.0]), lipschitz=1.0),
        d=1, m=1,
        x0=PdmpState.make([1.0], [0.0]),
        intensity_floor=1.0,
        contains=lambda x: bool(x.y[0] >= 1.0),
        exact=AnalyticSolution(flow_map, hazard, hazard_inverse),
    )


def _exp_hazard() -> PdmpModel:
    # y' = y, lambda = y^2; a jump removes the fraction u/2 of y.  The hazard
    # is a quadratic invariant of the flow, which none of the methods keeps.
    def flow(x, t):
        return np.array([x.y[0], 0.0])

    def flow_map(x, tau):
        return PdmpState(x.y * math.exp(tau), x.theta.copy())

    def hazard(x, tau):
        return 0.5 * x.y[0] ** 2 * math.expm1(2.0 * tau)

    def hazard_inverse(x, c):
        return 0.5 * math.log1p(2.0 * c / x.y[0] ** 2)

    return PdmpModel(
        name=ToyKind.EXP_HAZARD.value,
        flow=flow,
        intensity=lambda x, t: float(x.y[0]) ** 2,
        kernel=ContinuousKernel(lambda x, u: np.array([-0.5 * u * x.y[0], 1.0]), lipschitz=0.5),
        d=1, m=1,
        x0=PdmpState.make([1.0], [0.0]),
        contains=lambda x: bool(x.y[0] > 0.0),
        exact=AnalyticSolution(flow_map, hazard, hazard_inverse),
    )


def _markov3() -> PdmpModel:
    Q = MARKOV3_GENERATOR
    pairs = [(i, j) for i in range(3) for j in range(3) if i != j]
    heights = np.zeros((len(pairs), 4))
    for k, (i, j) in enumerate(pairs):
        heights[k, 1 + i] = -1.0
        heights[k, 1 + j] = 1.0

    def current(x) -> int:
        return int(np.argmax(x.theta))

    def intensity(x, t):
        return float(-Q[current(x), current(x)])

    def probabilities(x):
        i = current(x)
        return np.array([Q[a, b] / -Q[i, i] if a == i else 0.0 for a, b in pairs])

    def flow_map(x, tau):
        return PdmpState(x.y.copy(), x.theta.copy())

    return PdmpModel(
        name=ToyKind.PURE_MARKOV_CHAIN.value,
        flow=lambda x, t: np.zeros(4),
        intensity=intensity,
        kernel=DiscreteKernel(heights, probabilities, [f"{a}->{b}" for a, b in pairs]),
        d=1, m=3,
        x0=PdmpState.make([0.0], [1.0, 0.0, 0.0]),
        intensity_floor=float(np.min(-np.diag(Q))),
        contains=lambda x: bool(np.all((x.theta == 0) | (x.theta == 1)) and x.theta.sum() == 1),
        exact=AnalyticSolution(flow_map, lambda x, tau: intensity(x, 0.0) * tau,
                               lambda x, c: c / intensity(x, 0.0)),
        metadata={"generator": Q.copy(), "transitions": pairs},
    )


_TOYS = {
    ToyKind.CONST_RATE: _const_rate,
    ToyKind.QUADRATIC_HAZARD: _quad_hazard,
    ToyKind.PURE_MARKOV_CHAIN: _markov3,
    ToyKind.EXP_HAZARD: _exp_hazard,
}


def build_toy_model(kind) -> PdmpModel:
    """Analytic oracle models; each carries its exact flow and hazard inverse.

    ``const-rate``
        ``f = 0``, ``lambda = 2``; each jump adds 1 to a counter.
    ``quad-hazard``
        ``y' = 1``, ``lambda = y``, ``y(0) = 1``; jumps reset ``y`` to 1.
    ``markov3``
        A three-state continuous-time Markov chain (one-hot ``theta``).
    ``exp-hazard``
        ``y' = y``, ``lambda = y**2``, ``y(0) = 1``; a jump scales ``y`` by
        ``1 - u/2``.  Unlike ``quad-hazard`` no listed method integrates
        it exactly, so it exhibits every method's order.
    """
    try:
        k = ToyKind(kind)
    except ValueError:
        raise ModelError(f"unknown toy model {kind!r}") from None
    return _TOYS[k]()


MODEL_IDS = ("hh-p1", "hh-p2", "const-rate", "quad-hazard", "markov3", "exp-hazard")

MODEL_DESCRIPTIONS = {
    "hh-p1": "stochastic Hodgkin-Huxley, squid axon rates, 300 Na / 30 K channels",
    "hh-p2": "stochastic Hodgkin-Huxley, sodium-only neuron, 1000 Na channels",
    "const-rate": "constant intensity 2, counter jumps",
    "quad-hazard": "y' = 1, intensity y, reset to 1 at jumps",
    "markov3": "three-state Markov chain (no flow)",
    "exp-hazard": "y' = y, intensity y^2, random proportional drop at jumps",
}


def get_model(model_id: str, overrides: Optional[dict] = None) -> PdmpModel:
    """Build a model from its id; ``overrides`` apply to HH parameters only."""
    overrides = dict(overrides or {})
    if model_id in ("hh-p1", "hh-p2"):
        base = HHParams.p1() if model_id == "hh-p1" else HHParams.p2()
        theta0 = overrides.pop("theta0", None)
        params = base.with_overrides(**overrides)
        return build_hh_model(params, theta0=None if theta0 is None else np.asarray(theta0, float))
    if overrides:
        raise ModelError(f"model {model_id!r} takes no parameter overrides")
    if model_id in MODEL_IDS:
        return build_toy_model(model_id)
    raise DomainError(f"unknown model id {model_id!r}; expected one of: {', '.join(MODEL_IDS)}")
