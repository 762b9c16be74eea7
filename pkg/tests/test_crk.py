import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import PUBLISHED_TABLEAUS
from pdmpsim.crk import (Method, all_tableaus, builtin_tableau, check_tableau_exact,
                         dense_step_eval, solve_stages, step)
from pdmpsim.errors import DomainError, StepError

NAMES = [m.value for m in Method]
ORDERS = {"euler": 1, "trapezoidal": 2, "radau2": 3, "lobatto3": 4}


@pytest.mark.parametrize("name", NAMES)
def test_structure_is_exact(name):
    assert check_tableau_exact(builtin_tableau(name)) == []


@pytest.mark.parametrize("name", NAMES)
def test_coefficients_match_published_polynomials(name):
    tab = builtin_tableau(name)
    ref = PUBLISHED_TABLEAUS[name]
    assert list(tab.c_exact) == ref["c"]
    assert list(tab.beta_exact) == ref["beta"]
    for x in [Fraction(0), Fraction(1, 7), Fraction(1, 2), Fraction(5, 6), Fraction(1)]:
        assert list(tab.b_exact(x)) == [b(x) for b in ref["b"]]
    assert tab.order == ORDERS[name]


def test_endpoint_values_from_the_listed_formulas():
    assert builtin_tableau("trapezoidal").b_exact(Fraction(1)) == (Fraction(1, 2), Fraction(1, 2))
    assert builtin_tableau("lobatto3").b_exact(Fraction(1)) == (
        Fraction(1, 6), Fraction(2, 3), Fraction(1, 6))
    assert sum(builtin_tableau("radau2").beta_exact) == 1


def test_float_b_is_exact_at_endpoints():
    for tab in all_tableaus():
        assert np.array_equal(tab.b(0.0), np.zeros(tab.s))
        assert np.array_equal(tab.b(1.0), tab.beta)


def test_parse_accepts_aliases_and_rejects_unknown():
    assert builtin_tableau(Method.EULER).name == "euler"
    with pytest.raises(ValueError):
        builtin_tableau("rk45")


@pytest.mark.parametrize("name", NAMES)
def test_constant_rhs_stage_derivatives(name):
    v = np.array([1.5, -2.0])
    F = solve_stages(builtin_tableau(name), lambda t, y: v, 0.3, np.zeros(2), 0.1)
    assert np.allclose(F, v, atol=1e-14, rtol=0)


def test_trapezoidal_linear_stage_closed_form():
    F = solve_stages(builtin_tableau("trapezoidal"), lambda t, y: y, 0.0, np.array([1.0]), 0.1)
    assert F[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert F[1, 0] == pytest.approx(1.05 / 0.95, abs=1e-13)


def test_radau_linear_stages_match_direct_solve():
    lam, h, y = -3.0, 0.2, 1.3
    tab = builtin_tableau("radau2")
    F = solve_stages(tab, lambda t, u: lam * u, 0.0, np.array([y]), h)
    # K = y 1 + h lam A K  =>  (I - h lam A) K = y 1
    K = np.linalg.solve(np.eye(2) - h * lam * tab.A, y * np.ones(2))
    assert np.allclose(F[:, 0], lam * K, atol=1e-12, rtol=0)


@pytest.mark.parametrize("name", NAMES)
def test_zero_and_unit_rhs_steps(name):
    tab = builtin_tableau(name)
    y = np.array([0.7, -0.2])
    assert np.array_equal(step(tab, lambda t, u: np.zeros(2), 0.0, y, 0.3)[0], y)
    y1, _ = step(tab, lambda t, u: np.ones(2), 0.0, y, 0.25)
    assert np.allclose(y1, y + 0.25, atol=1e-15, rtol=0)


def _local_error(tab, h):
    y1, _ = step(tab, lambda t, u: u, 0.0, np.array([1.0]), h)
    return abs(y1[0] - math.exp(h))


def test_lobatto_local_error_scales_with_fifth_power():
    tab = builtin_tableau("lobatto3")
    e1, e2 = _local_error(tab, 0.1), _local_error(tab, 0.05)
    C = e1 / 0.1**5
    assert e1 <= 1.01 * C * 0.1**5
    assert math.log2(e1 / e2) == pytest.approx(5.0, abs=0.2)


def _global_errors(tab, hs, T=1.0):
    errs, dense = [], []
    for h in hs:
        n = int(round(T / h))
        y, t, worst = np.array([1.0]), 0.0, 0.0
        for _ in range(n):
            F = solve_stages(tab, lambda t_, u: u, t, y, h)
            for xi in (0.3, 0.7):
                worst = max(worst, abs(dense_step_eval(tab, F, y, h, xi)[0] - math.exp(t + xi * h)))
            y = y + h * (tab.beta @ F)
            t += h
        errs.append(abs(y[0] - math.exp(T)))
        dense.append(worst)
    return errs, dense


@pytest.mark.parametrize("name", NAMES)
def test_classical_and_dense_order_on_exponential(name):
    tab = builtin_tableau(name)
    hs = [0.1 / 2**k for k in range(5)]
    errs, dense = _global_errors(tab, hs)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    dslope = np.polyfit(np.log(hs), np.log(dense), 1)[0]
    assert abs(slope - tab.order) <= 0.3
    # the interpolant is uniformly convergent at the method's order as well
    assert abs(dslope - tab.order) <= 0.3


def test_dense_step_endpoints():
    tab = builtin_tableau("radau2")
    y = np.array([2.0])
    y1, F = step(tab, lambda t, u: -u, 0.0, y, 0.1)
    assert np.array_equal(dense_step_eval(tab, F, y, 0.1, 0.0), y)
    assert np.allclose(dense_step_eval(tab, F, y, 0.1, 1.0), y1, atol=1e-15, rtol=0)


def test_trapezoidal_dense_value_on_linear_time_rhs():
    tab = builtin_tableau("trapezoidal")
    _, F = step(tab, lambda t, u: np.array([t]), 0.0, np.array([0.0]), 1.0)
    assert dense_step_eval(tab, F, np.array([0.0]), 1.0, 0.5)[0] == pytest.approx(0.125, abs=1e-15)


def test_dense_eval_rejects_xi_outside_unit_interval():
    tab = builtin_tableau("euler")
    with pytest.raises(DomainError):
        dense_step_eval(tab, np.ones((1, 1)), np.zeros(1), 0.1, 1.5)


def test_nonpositive_step_rejected():
    with pytest.raises(DomainError):
        solve_stages(builtin_tableau("euler"), lambda t, y: y, 0.0, np.ones(1), 0.0)


def test_newton_failure_raises_step_error():
    # y' = y^2 from y = 1 with h = 2 has no real stage solution for the implicit methods
    with pytest.raises(StepError):
        solve_stages(builtin_tableau("radau2"), lambda t, y: y * y, 0.0, np.array([1.0]), 2.0)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(NAMES), st.floats(-2, 2), st.floats(1e-3, 0.3))
def test_linear_scalar_step_matches_stability_function(name, lam, h):
    """One step on y' = lam y equals the direct linear solve of the stage system."""
    tab = builtin_tableau(name)
    y1, _ = step(tab, lambda t, u: lam * u, 0.0, np.array([1.0]), h)
    K = np.linalg.solve(np.eye(tab.s) - h * lam * tab.A, np.ones(tab.s))
    expect = 1.0 + h * lam * (tab.beta @ K)
    assert y1[0] == pytest.approx(expect, rel=1e-10, abs=1e-12)
