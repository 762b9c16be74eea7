"""Pathwise error functionals and empirical convergence orders.

A reference path (exact or computed with a much smaller step) and an
approximation generated from the same uniform stream are compared jump by
jump.  Errors are Euclidean norms over the full state ``(y, theta)`` except
for the sup-norm error, which only looks at ``y``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import PdmpModel, Trajectory, eval_dense
from .crk import Method, builtin_tableau
from .errors import DomainError, InsufficientDataError, NumericalError, PairingError
from .rng import UniformStream
from .simulate import (REFERENCE_H, SimulationConfig, simulate_approx,
                       simulate_exact_analytic)

__all__ = [
    "ErrorReport",
    "compare",
    "OrderFit",
    "fit_order",
    "estimate_order",
    "ReferenceSpec",
    "StudyRow",
    "StudyResult",
    "convergence_study",
    "ERROR_FIELDS",
    "ANALYTIC_FLOOR",
    "DEFAULT_EVAL_POINTS",
]

ERROR_FIELDS = ("err_phase_jumps", "err_jump_times", "err_endpoint", "err_sup_continuous")
DEFAULT_EVAL_POINTS = 10_000
# round-off level of closed-form references
ANALYTIC_FLOOR = 1e-13
FLOOR_FACTOR = 10.0


@dataclass(frozen=True)
class ErrorReport:
    err_phase_jumps: float
    err_jump_times: float
    err_endpoint: float
    err_sup_continuous: float
    discrete_mismatch_count: int
    n_jumps_compared: int

    def as_dict(self) -> dict:
        return asdict(self)


def compare(reference: Trajectory, approx: Trajectory,
            n_eval_points: int = DEFAULT_EVAL_POINTS) -> ErrorReport:
    """Pathwise errors of ``approx`` against ``reference``.

    The first ``N`` jumps are paired, ``N`` being the number of reference
    jumps before the horizon.

    Raises
    ------
    PairingError
        If ``approx`` recorded fewer than ``N`` jumps; rerun it with
        ``min_jumps=N``.
    """
    T = reference.horizon
    if approx.horizon != T:
        raise PairingError(f"horizons differ: {T} vs {approx.horizon}")
    if n_eval_points < 2:
        raise DomainError("need at least two probe points")
    N = reference.n_jumps_in_horizon
    if approx.n_jumps < N:
        raise PairingError(
            f"approximation has {approx.n_jumps} jumps but the reference has {N} before T; "
            f"rerun the approximation with min_jumps={N}")

    err_x = 0.0
    mismatches = 0
    for n in range(N + 1):
        a, b = reference.post_jump_states[n], approx.post_jump_states[n]
        err_x = max(err_x, float(np.linalg.norm(a.vector() - b.vector())))
        if n and not np.array_equal(a.theta, b.theta):
            mismatches += 1
    err_t = float(np.max(np.abs(reference.jump_times[: N + 1] - approx.jump_times[: N + 1])))

    end_ref, end_app = eval_dense(reference, T), eval_dense(approx, T)
    err_end = float(np.linalg.norm(end_ref.vector() - end_app.vector()))

    ts = np.linspace(0.0, T, n_eval_points)
    dy = reference.eval_y_many(ts) - approx.eval_y_many(ts)
    err_sup = float(np.max(np.linalg.norm(dy, axis=1)))
    return ErrorReport(err_x, err_t, err_end, err_sup, mismatches, N)


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    h: tuple
    errors: tuple
    excluded: dict


def _unpack(points) -> list[tuple[float, float, int]]:
    out = []
    for p in points:
        p = tuple(p)
        if len(p) == 2:
            out.append((float(p[0]), float(p[1]), 0))
        elif len(p) == 3:
            out.append((float(p[0]), float(p[1]), int(p[2])))
        else:
            raise DomainError("points must be (h, error) or (h, error, mismatches)")
    return out


def fit_order(points: Iterable, floor: float = 0.0, min_points: int = 3) -> OrderFit:
    """Least-squares slope of ``log(error)`` against ``log(h)`` after filtering.

    Parameters
    ----------
    points : iterable
        ``(h, error)`` or ``(h, error, mismatches)`` tuples.
    floor : float
        Error floor of the reference; points with ``error <= 10 * floor``
        are dropped, as are points with mismatches or non-finite errors.

    Raises
    ------
    InsufficientDataError
        If fewer than ``min_points`` points survive; ``reasons`` counts the
        exclusions by cause.
    """
    reasons = {"mismatch": 0, "below_floor": 0, "non_finite": 0, "non_positive_h": 0}
    keep = []
    for h, err, mis in _unpack(points):
        if not (h > 0 and math.isfinite(h)):
            reasons["non_positive_h"] += 1
        elif not math.isfinite(err) or mis < 0:
            reasons["non_finite"] += 1
        elif mis > 0:
            reasons["mismatch"] += 1
        elif err <= FLOOR_FACTOR * floor or err <= 0.0:
            reasons["below_floor"] += 1
        else:
            keep.append((h, err))
    if len({h for h, _ in keep}) < min_points:
        raise InsufficientDataError(
            f"{len(keep)} usable point(s), need {min_points}",
            {k: v for k, v in reasons.items() if v})
    lh = np.log([h for h, _ in keep])
    le = np.log([e for _, e in keep])
    slope, intercept = np.polyfit(lh, le, 1)
    return OrderFit(float(slope), float(intercept), tuple(h for h, _ in keep),
                    tuple(e for _, e in keep), {k: v for k, v in reasons.items() if v})


def estimate_order(points: Iterable, floor: float = 0.0) -> float:
    """Empirical convergence order; see :func:`fit_order`."""
    return fit_order(points, floor).slope


@dataclass(frozen=True)
class ReferenceSpec:
    """``kind="analytic"`` or ``kind="numeric"`` with a method and step size."""

    kind: str = "analytic"
    method: str = Method.LOBATTO_IIIA_3.value
    h: float = REFERENCE_H

    def __post_init__(self):
        if self.kind not in ("analytic", "numeric"):
            raise DomainError(f"reference kind must be 'analytic' or 'numeric', got {self.kind!r}")
        if self.kind == "numeric":
            Method.parse(self.method)
            if not self.h > 0:
                raise DomainError("reference step size must be positive")

    @classmethod
    def parse(cls, spec) -> "ReferenceSpec":
        if isinstance(spec, ReferenceSpec):
            return spec
        if spec is None or spec == "analytic":
            return cls()
        if isinstance(spec, dict):
            kind = spec.get("kind", "numeric" if "h" in spec else "analytic")
            return cls(kind=kind, method=spec.get("method", Method.LOBATTO_IIIA_3.value),
                       h=float(spec.get("h", REFERENCE_H)))
        if isinstance(spec, (tuple, list)) and len(spec) == 2:
            return cls(kind="numeric", method=str(spec[0]), h=float(spec[1]))
        raise DomainError(f"cannot interpret reference spec {spec!r}")

    def describe(self) -> str:
        return "analytic" if self.kind == "analytic" else f"{self.method}@{self.h:g}"


@dataclass
class StudyRow:
    model: str
    tableau: str
    h: float
    err_phase_jumps: float
    err_jump_times: float
    err_endpoint: float
    err_sup_continuous: float
    mismatches: int
    n_jumps: int
    wall_time_s: float
    failure: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.failure)


@dataclass
class StudyResult:
    model: str
    seed: int
    horizon: float
    reference: ReferenceSpec
    reference_jumps: int
    rows: list
    floors: dict
    h_star: dict
    slopes: dict
    slope_notes: dict = field(default_factory=dict)

    def rows_for(self, tableau: str) -> list:
        return [r for r in self.rows if r.tableau == tableau]


def _h_star(rows: Sequence[StudyRow]) -> Optional[float]:
    """Largest tested ``h`` such that every ``h' <= h`` ran cleanly without mismatches."""
    best = None
    for r in sorted(rows, key=lambda r: r.h):
        if r.failed or r.mismatches != 0:
            break
        best = r.h
    return best


def _reference_run(model: PdmpModel, spec: ReferenceSpec, T: float, seed: int,
                   use_fast: bool, h: Optional[float] = None,
                   min_jumps: Optional[int] = None) -> Trajectory:
    stream = UniformStream(seed)
    if spec.kind == "analytic":
        return simulate_exact_analytic(model, T, stream, min_jumps=min_jumps)
    cfg = SimulationConfig(method=spec.method, h=spec.h if h is None else h, horizon=T,
                           seed=seed, min_jumps=min_jumps, use_fast=use_fast)
    traj = simulate_approx(model, cfg, stream)
    traj.meta["reference"] = True
    return traj


def _richardson_floors(model, spec, ref, T, seed, n_eval_points, use_fast) -> dict:
    """Error level of a numeric reference, from a run at half its step size.

    With a fourth-order reference, ``|ref(h) - exact| ~ 16/15 |ref(h) - ref(h/2)|``.
    """
    if spec.kind == "analytic":
        return {f: ANALYTIC_FLOOR for f in ERROR_FIELDS}
    order = builtin_tableau(spec.method).order
    fine = _reference_run(model, spec, T, seed, use_fast, h=spec.h / 2.0,
                          min_jumps=ref.n_jumps_in_horizon)
    rep = compare(fine, ref, n_eval_points)
    factor = 2.0**order / (2.0**order - 1.0)
    floors = {f: max(factor * getattr(rep, f), ANALYTIC_FLOOR) for f in ERROR_FIELDS}
    floors["reference_mismatches"] = rep.discrete_mismatch_count
    return floors


def convergence_study(model: PdmpModel, methods: Sequence[str], h_list: Sequence[float],
                      T: float, seed: int, reference: Union[str, dict, tuple, ReferenceSpec] = "analytic",
                      *, n_eval_points: int = DEFAULT_EVAL_POINTS, use_fast: bool = True,
                      slope_fields: Sequence[str] = ("err_phase_jumps", "err_jump_times"),
                      estimate_floor: bool = True) -> StudyResult:
    """Run one reference and every ``(method, h)`` approximation on the same stream.

    Slopes are fitted per method and error functional over the rows with
    ``h <= h*`` (see :func:`_h_star`), after the filtering of
    :func:`fit_order` against the reference floor.  Methods whose slope
    cannot be estimated get ``nan`` and a note in ``slope_notes``.
    """
    if not len(h_list):
        raise DomainError("h_list must not be empty")
    hs = [float(h) for h in h_list]
    if any(not h > 0 for h in hs):
        raise DomainError("step sizes must be positive")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise DomainError("h_list must be strictly decreasing")
    if not len(methods):
        raise DomainError("need at least one method")
    methods = [Method.parse(m).value for m in methods]
    spec = ReferenceSpec.parse(reference)
    if not T > 0:
        raise DomainError("horizon must be positive")

    ref = _reference_run(model, spec, T, seed, use_fast)
    N = ref.n_jumps_in_horizon
    floors = (_richardson_floors(model, spec, ref, T, seed, n_eval_points, use_fast)
              if estimate_floor else {f: ANALYTIC_FLOOR for f in ERROR_FIELDS})

    rows = []
    for method in methods:
        for h in hs:
            cfg = SimulationConfig(method=method, h=h, horizon=T, seed=seed, min_jumps=N,
                                   use_fast=use_fast)
            t0 = time.perf_counter()
            try:
                approx = simulate_approx(model, cfg, UniformStream(seed))
                rep = compare(ref, approx, n_eval_points)
            except (NumericalError, PairingError) as exc:
                rows.append(StudyRow(model.name, method, h, *([math.nan] * 4), -1, -1,
                                     time.perf_counter() - t0, failure=str(exc)))
                continue
            rows.append(StudyRow(model.name, method, h, rep.err_phase_jumps, rep.err_jump_times,
                                 rep.err_endpoint, rep.err_sup_continuous,
                                 rep.discrete_mismatch_count, approx.n_jumps_in_horizon,
                                 time.perf_counter() - t0))

    h_star, slopes, notes = {}, {}, {}
    for method in methods:
        mrows = [r for r in rows if r.tableau == method]
        hs_ = _h_star(mrows)
        h_star[method] = hs_
        slopes[method] = {}
        for f in slope_fields:
            usable = [r for r in mrows if hs_ is not None and r.h <= hs_]
            try:
                fit = fit_order([(r.h, getattr(r, f), r.mismatches) for r in usable], floors[f])
                slopes[method][f] = fit.slope
            except InsufficientDataError as exc:
                slopes[method][f] = math.nan
                notes.setdefault(method, {})[f] = str(exc)
    return StudyResult(model.name, seed, T, spec, N, rows, floors, h_star, slopes, notes)
