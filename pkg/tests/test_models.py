import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import hh_p1_rates, hh_total_rate, hh_transitions
from pdmpsim.core import PdmpState
from pdmpsim.errors import DomainError, ModelError
from pdmpsim.models import (HH_EDGES, MARKOV3_GENERATOR, MODEL_IDS, HHParams, affine_solution,
                            build_frozen_hh_flow, build_hh_model, build_toy_model, get_model,
                            hh_rates, hh_stationary_theta, rate_coefficients)

P1 = HHParams.p1()


def test_p1_rate_values():
    a_m, b_m, a_h, b_h, a_n, b_n = hh_rates("P1", 0.0)
    assert b_m == 4.0
    assert a_h == 0.07
    assert hh_rates("P1", 10.0)[4] == pytest.approx(0.1, abs=1e-15)


def test_p1_rates_agree_with_independent_formulas():
    for y in np.linspace(-40, 140, 37):
        ours = dict(zip(("a_m", "b_m", "a_h", "b_h", "a_n", "b_n"), hh_rates("P1", y)))
        ref = hh_p1_rates(float(y))
        for k in ours:
            assert ours[k] == pytest.approx(ref[k], rel=1e-12)


@pytest.mark.parametrize("rs,y,idx", [("P1", 10.0, 4), ("P1", 25.0, 0), ("P2", 25.41, 0),
                                      ("P2", -27.74, 2), ("P2", 21.001, 1)])
def test_removable_singularities_are_smooth(rs, y, idx):
    mid = hh_rates(rs, y)[idx]
    for dy in (1e-8, -1e-8):
        assert abs(hh_rates(rs, y + dy)[idx] - mid) <= 1e-6
    assert math.isfinite(mid)


@pytest.mark.parametrize("rs", ["P1", "P2"])
def test_rates_non_negative(rs):
    ys = np.linspace(-50, 150, 10_000)
    for r in hh_rates(rs, ys):
        assert np.all(r >= 0) and np.all(np.isfinite(r))


def test_edge_list_matches_kinetic_scheme():
    r = hh_p1_rates(7.0)
    rates = hh_rates("P1", 7.0)
    ours = {(i, j): m * rates[k] for i, j, k, m in HH_EDGES}
    ref = {(i, j): v for i, j, v in hh_transitions(r)}
    assert set(ours) == set(ref)
    for key in ours:
        assert ours[key] == pytest.approx(ref[key], rel=1e-13)


def test_edge_order_na_then_k():
    froms = [e[0] for e in HH_EDGES]
    assert max(froms[:20]) <= 8 and min(froms[20:]) >= 9
    assert [e[2] for e in HH_EDGES[:6]] == [0] * 6
    assert [e[2] for e in HH_EDGES[6:12]] == [1] * 6


def test_heights_conserve_each_channel_family():
    model = build_hh_model()
    H = model.kernel.heights
    assert np.all(H[:, 0] == 0)
    assert np.all(H[:, 1:9].sum(axis=1) == 0)
    assert np.all(H[:, 9:].sum(axis=1) == 0)


def test_intensity_all_closed_sodium():
    p = P1.with_overrides(N_K=0)
    theta = np.zeros(13)
    theta[0] = 300
    model = build_hh_model(p, theta0=theta)
    x = PdmpState.make([5.0], theta)
    a_m, _, a_h, *_ = hh_rates("P1", 5.0)
    assert model.intensity(x, 0.0) == pytest.approx(300 * (3 * a_m + a_h), rel=1e-14)


def test_flow_all_open_sodium():
    p = P1.with_overrides(N_K=0)
    theta = np.zeros(13)
    theta[7] = 300
    model = build_hh_model(p, theta0=theta)
    for t, current in ((0.5, 0.0), (1.5, 30.0)):
        x = PdmpState.make([20.0], theta)
        expect = (-4.0 * 300 * (20.0 - 115.0) - 0.3 * 20.0 + current) / 1.0
        assert model.flow(x, t)[0] == pytest.approx(expect, rel=1e-14)
        assert np.all(model.flow(x, t)[1:] == 0)


def test_transition_probability_reads_off_rate():
    model = build_hh_model()
    x = PdmpState.make([3.0], model.x0.theta)
    a_m = hh_rates("P1", 3.0)[0]
    lam = model.intensity(x, 0.0)
    assert model.kernel.probabilities(x)[0] == pytest.approx(3 * a_m * x.theta[0] / lam, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(-40, 130), st.integers(0, 2**32))
def test_intensity_equals_edge_weight_sum(y, seed):
    rng = np.random.default_rng(seed)
    theta = np.concatenate([rng.multinomial(300, np.ones(8) / 8), rng.multinomial(30, np.ones(5) / 5)])
    model = build_hh_model(P1, theta0=theta)
    x = PdmpState.make([y], theta)
    lam = model.intensity(x, 0.0)
    assert lam == pytest.approx(hh_total_rate(hh_p1_rates(y), theta), rel=1e-12)
    assert rate_coefficients(theta) @ np.array(hh_rates("P1", y)) == pytest.approx(lam, rel=1e-12)


def test_stationary_start():
    th = hh_stationary_theta(P1)
    assert th[:8].sum() == 300 and th[8:].sum() == 30
    assert np.all(th == np.round(th))
    # at rest nearly every sodium channel is inactivated or closed
    assert th[7] == 0 and th[12] == 0


def test_p2_has_no_potassium():
    m = get_model("hh-p2")
    assert m.x0.theta[8:].sum() == 0 and m.x0.theta[:8].sum() == 1000
    assert m.name == "hh-p2"


def test_invalid_parameters():
    with pytest.raises(ModelError):
        P1.with_overrides(bogus=1.0)
    with pytest.raises(ModelError):
        P1.with_overrides(C=0.0)
    with pytest.raises(ModelError):
        build_hh_model(P1, theta0=np.zeros(13))
    with pytest.raises(DomainError):
        get_model("hh-p3")
    with pytest.raises(ModelError):
        get_model("markov3", {"C": 1.0})


def test_intensity_floor_is_positive_and_below_resting_rate():
    m = build_hh_model()
    assert 0 < m.intensity_floor <= m.intensity(m.x0, 0.0)


def test_const_rate_first_jump():
    m = build_toy_model("const-rate")
    assert m.exact.hazard_inverse(m.x0, -math.log(0.5)) == pytest.approx(math.log(2) / 2, abs=1e-15)


def test_quad_hazard_first_jump():
    m = build_toy_model("quad-hazard")
    assert m.exact.hazard_inverse(m.x0, 1.5) == 1.0
    x = m.exact.flow_map(m.x0, 1.0)
    h = m.kernel.H(x, 0.3)
    assert x.shifted(h).y[0] == 1.0


def test_markov3_generator():
    assert np.allclose(MARKOV3_GENERATOR.sum(axis=1), 0.0, atol=0)
    m = build_toy_model("markov3")
    for i in range(3):
        x = PdmpState.make([0.0], np.eye(3)[i])
        assert m.intensity(x, 0.0) == -MARKOV3_GENERATOR[i, i]
        assert m.kernel.probabilities(x).sum() == pytest.approx(1.0, abs=1e-15)


def test_exp_hazard_inverse():
    m = build_toy_model("exp-hazard")
    x = PdmpState.make([1.7], [0.0])
    tau = m.exact.hazard_inverse(x, 0.9)
    assert m.exact.hazard(x, tau) == pytest.approx(0.9, rel=1e-14)


def test_affine_solution_is_the_flow():
    th = hh_stationary_theta(P1)
    model = build_frozen_hh_flow(P1, th)
    # a centred difference of the closed form reproduces the vector field
    for t in (0.5, 1.5, 3.0):
        eps = 1e-6
        y = affine_solution(P1, th, 0.0, t)
        dy = (affine_solution(P1, th, 0.0, t + eps) - affine_solution(P1, th, 0.0, t - eps)) / (2 * eps)
        assert dy == pytest.approx(model.flow(PdmpState.make([y], th), t)[0], rel=1e-6, abs=1e-6)
    assert affine_solution(P1, th, 0.0, 0.0) == 0.0


def test_every_model_id_builds():
    for mid in MODEL_IDS:
        assert get_model(mid).name == mid
