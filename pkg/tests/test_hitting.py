import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import quad_hazard_tau
from pdmpsim.core import DiscreteKernel, PdmpModel, PdmpState
from pdmpsim.crk import Method, builtin_tableau
from pdmpsim.errors import DomainError, NumericalError
from pdmpsim.hitting import (CapReached, CrossingResult, find_crossing_in_step,
                             integrate_until_threshold)
from pdmpsim.models import build_hh_model, build_toy_model

METHODS = [m.value for m in Method]


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("h", [0.5, 0.1, 0.01, 0.003])
def test_constant_rate_hits_exactly(method, h):
    m = build_toy_model("const-rate")
    res = integrate_until_threshold(m, builtin_tableau(method), m.x0, math.log(2), h, 0.0, math.inf)
    assert isinstance(res, CrossingResult)
    assert res.tau_hat == pytest.approx(math.log(2) / 2, abs=1e-12)


def test_quadratic_hazard_exact_for_second_order_and_up():
    m = build_toy_model("quad-hazard")
    for method in ("trapezoidal", "radau2", "lobatto3"):
        for h in (0.3, 0.07):
            res = integrate_until_threshold(m, builtin_tableau(method), m.x0, 1.5, h, 0.0, 10.0)
            assert res.tau_hat == pytest.approx(1.0, abs=1e-12)


def test_quadratic_hazard_euler_converges_at_first_order():
    m = build_toy_model("quad-hazard")
    hs = [0.1 / 2**k for k in range(6)]
    errs = [abs(integrate_until_threshold(m, builtin_tableau("euler"), m.x0, 1.5, h, 0.0, 10.0).tau_hat - 1.0)
            for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


def test_cap_reached_when_threshold_out_of_range():
    m = build_toy_model("const-rate")
    res = integrate_until_threshold(m, builtin_tableau("radau2"), m.x0, 50.0, 0.1, 1.0, 3.0)
    assert isinstance(res, CapReached)
    assert res.segment.t_start == 1.0 and res.segment.t_grid[-1] >= 3.0


def test_linear_interpolant_quarter():
    tab = builtin_tableau("euler")
    w_left, delta, h = 0.3, 0.8, 0.2
    xi = find_crossing_in_step(tab, np.array([[delta / h]]), w_left, h, w_left + delta / 4)
    assert xi == pytest.approx(0.25, abs=1e-15)


def test_right_endpoint_crossing():
    tab = builtin_tableau("trapezoidal")
    F = np.array([[1.0], [3.0]])
    h, w_left = 0.5, 2.0
    w_right = w_left + h * float(tab.beta @ F[:, 0])
    assert find_crossing_in_step(tab, F, w_left, h, w_right) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(0.01, 0.5), st.floats(0.01, 0.99))
def test_trapezoidal_quadratic_root(y0, h, frac):
    """Per-step hazard for y' = 1, lambda = y is y0 h xi + h^2 xi^2 / 2 exactly."""
    tab = builtin_tableau("trapezoidal")
    F = np.array([y0, y0 + h])  # lambda at the stage values y0 and y0 + h
    w_end = y0 * h + 0.5 * h * h
    thr = frac * w_end
    xi = find_crossing_in_step(tab, F, 0.0, h, thr)
    # closed form: positive root of (h^2/2) xi^2 + y0 h xi - thr
    expect = quad_hazard_tau(y0, thr) / h
    assert xi == pytest.approx(expect, abs=1e-12)


def test_crossing_preconditions():
    tab = builtin_tableau("euler")
    with pytest.raises(DomainError):
        find_crossing_in_step(tab, np.array([1.0]), 1.0, 0.1, 0.5)
    with pytest.raises(DomainError):
        find_crossing_in_step(tab, np.array([1.0]), 0.0, 0.1, 5.0)


def test_input_validation():
    m = build_toy_model("const-rate")
    tab = builtin_tableau("euler")
    with pytest.raises(DomainError):
        integrate_until_threshold(m, tab, m.x0, -1.0, 0.1, 0.0, 1.0)
    with pytest.raises(DomainError):
        integrate_until_threshold(m, tab, m.x0, 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        integrate_until_threshold(m, tab, m.x0, 1.0, 0.1, 1.0, 1.0)


@pytest.mark.parametrize("use_fast", [True, False])
def test_grid_lands_on_stimulus_breakpoints(use_fast):
    m = build_hh_model()
    res = integrate_until_threshold(m, builtin_tableau("radau2"), m.x0, 1e6, 0.3, 0.0, 2.5,
                                    use_fast=use_fast, max_steps=10**6)
    tg = res.segment.t_grid
    assert 1.0 in tg and 2.0 in tg
    # the grid restarts at the breakpoint
    i = int(np.flatnonzero(tg == 1.0)[0])
    assert tg[i + 1] == pytest.approx(1.3, abs=1e-15)


def _toy(flow, lam):
    return PdmpModel("toy", flow, lam, DiscreteKernel([[0.0, 1.0]], lambda x: np.ones(1)),
                     d=1, m=1, x0=PdmpState.make([1.0], [0.0]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_reports_numerical_error():
    m = _toy(lambda x, t: np.array([x.y[0] ** 2, 0.0]), lambda x, t: 1e-12)
    with pytest.raises(NumericalError) as exc:
        integrate_until_threshold(m, builtin_tableau("euler"), m.x0, 1.0, 0.5, 0.0, 1e6)
    assert "non-finite" in str(exc.value)


def test_negative_intensity_reports_numerical_error():
    m = _toy(lambda x, t: np.array([0.0, 0.0]), lambda x, t: -1.0)
    with pytest.raises(NumericalError):
        integrate_until_threshold(m, builtin_tableau("euler"), m.x0, 1.0, 0.1, 0.0, 10.0)


def test_step_budget():
    m = build_toy_model("const-rate")
    with pytest.raises(NumericalError):
        integrate_until_threshold(m, builtin_tableau("euler"), m.x0, 10.0, 0.01, 0.0, 100.0,
                                  max_steps=5)
