"""Closed-loop stepping, the weighted cost, and GA tuning of PID/FOPID."""

import math

import numpy as np
import pytest
from dataclasses import replace

from fractune.lti import (
    DomainError,
    ParameterError,
    TestBenchFamily,
    TestBenchSpec,
    UNITY_TF,
    DelayedTF,
    make_foptd,
    make_testbench,
)
from fractune.simulation import (
    ControllerKind,
    DisturbanceSpec,
    FOPIDParams,
    GAIN_BOUND,
    ORDER_BOUND,
    OustaloupConfig,
    SimConfig,
    Trajectory,
    closed_loop_step,
    cost_J,
    default_tuning_ga,
    oustaloup_approx,
    tune_controller,
)

F = TestBenchFamily
P1_N3 = make_testbench(TestBenchSpec(F.P1, 3))
P3_T5 = make_testbench(TestBenchSpec(F.P3, 5.0))
TABLE3_P1N3 = FOPIDParams(1.182448, 0.413749, 0.782454)
TABLE3_P3T5 = FOPIDParams(1.993027, 0.170803, 3.388806)
FAST = SimConfig(dt=0.05)


# --- fractional operator --------------------------------------------------------

def test_oustaloup_integer_orders_are_exact():
    assert oustaloup_approx(0.0).num == (1.0,)
    assert oustaloup_approx(0.0).den == (1.0,)
    s = oustaloup_approx(1.0)
    assert s.num == (1.0, 0.0)
    assert s.den == (1.0,)


def test_oustaloup_half_order_at_band_center():
    cfg = OustaloupConfig(n_poles=5, omega_b=1e-2, omega_h=1e2)
    h = oustaloup_approx(0.5, cfg).eval_at(1j * 1.0)
    assert abs(h) == pytest.approx(1.0, abs=10 ** (1.0 / 20) - 1)  # 1 dB
    assert math.degrees(np.angle(h)) == pytest.approx(45.0, abs=3.0)


def test_oustaloup_tracks_power_law_across_central_decades():
    cfg = OustaloupConfig(n_poles=5, omega_b=1e-2, omega_h=1e2)
    tf = oustaloup_approx(0.5, cfg)
    for w in np.geomspace(0.1, 10.0, 25):
        h = tf.eval_at(1j * w)
        assert abs(abs(h) - math.sqrt(w)) / math.sqrt(w) < 10 ** (1.0 / 20) - 1
        assert abs(math.degrees(np.angle(h)) - 45.0) < 3.0


def test_oustaloup_rejects_out_of_range_alpha():
    with pytest.raises(ParameterError):
        oustaloup_approx(2.0)
    with pytest.raises(ParameterError):
        oustaloup_approx(-2.5)


def test_oustaloup_config_validation():
    with pytest.raises(ParameterError):
        OustaloupConfig(n_poles=0)
    with pytest.raises(ParameterError):
        OustaloupConfig(omega_b=1.0, omega_h=0.1)


# --- sim config -------------------------------------------------------------------

def test_sim_config_requires_integer_step_count():
    with pytest.raises(ParameterError):
        SimConfig(dt=0.3, horizon=1.0)
    with pytest.raises(ParameterError):
        SimConfig(dt=-0.1)
    with pytest.raises(ParameterError):
        SimConfig(w_itae=-1.0)


def test_disturbance_spec_validation():
    with pytest.raises(ParameterError):
        DisturbanceSpec(-1.0, 0.2)
    with pytest.raises(ParameterError):
        DisturbanceSpec(1.0, math.inf)


# --- closed-loop stepping -------------------------------------------------------------

def test_zero_gains_leave_plant_at_rest():
    tr = closed_loop_step(P1_N3, FOPIDParams(0.0, 0.0, 0.0),
                          scfg=SimConfig(dt=0.05, horizon=10.0))
    assert np.all(tr.y == 0.0)
    assert np.all(tr.u == 0.0)
    assert np.all(tr.e == 1.0)


def test_error_is_setpoint_minus_output():
    tr = closed_loop_step(P1_N3, TABLE3_P1N3, scfg=FAST, kind=ControllerKind.PID)
    assert np.array_equal(tr.e, 1.0 - tr.y)
    assert len(tr.t) == len(tr.y) == len(tr.u) == len(tr.e)


def test_unit_order_fopid_degenerates_to_pid():
    g = FOPIDParams(1.182448, 0.413749, 0.782454, 1.0, 1.0)
    a = closed_loop_step(P1_N3, g, scfg=FAST, kind=ControllerKind.FOPID)
    b = closed_loop_step(P1_N3, g, scfg=FAST, kind=ControllerKind.PID)
    rms = float(np.sqrt(np.mean((a.y - b.y) ** 2)))
    assert rms < 1e-6


def test_published_pid_step_response_p1n3():
    tr = closed_loop_step(P1_N3, TABLE3_P1N3, scfg=FAST, kind=ControllerKind.PID)
    J = cost_J(tr)
    assert J == pytest.approx(104.9453, rel=0.10)  # printed optimum
    assert not tr.diverged
    assert float(np.max(tr.y)) < 1.35  # small overshoot
    assert abs(tr.y[-1] - 1.0) < 0.02


def test_diverging_loop_is_flagged_not_raised():
    p4 = make_testbench(TestBenchSpec(F.P4, 1.0))
    tr = closed_loop_step(p4, FOPIDParams(100.0, 100.0, 0.0, 1.0, 1.0), scfg=FAST)
    assert tr.diverged
    assert cost_J(tr) == math.inf


def test_classical_kind_rejects_fractional_orders():
    with pytest.raises(ParameterError):
        closed_loop_step(P1_N3, FOPIDParams(1.0, 1.0, 0.0, 0.5, 1.0),
                         scfg=SimConfig(dt=0.05, horizon=1.0),
                         kind=ControllerKind.PID)


def test_full_derivative_order_needs_plant_roll_off():
    with pytest.raises(DomainError):
        closed_loop_step(make_foptd(1.0, 1.0, 0.0),
                         FOPIDParams(1.0, 1.0, 1.0, 1.0, 2.0),
                         scfg=SimConfig(dt=0.05, horizon=1.0))


def test_plant_must_be_strictly_proper():
    with pytest.raises(DomainError):
        closed_loop_step(DelayedTF(UNITY_TF), FOPIDParams(1.0, 1.0, 0.0),
                         scfg=SimConfig(dt=0.05, horizon=1.0))


def test_load_disturbance_only_acts_after_onset():
    clean = closed_loop_step(P1_N3, TABLE3_P1N3, scfg=FAST, kind=ControllerKind.PID)
    bumped = closed_loop_step(
        P1_N3, TABLE3_P1N3,
        scfg=replace(FAST, disturbance=DisturbanceSpec(50.0, 0.2)),
        kind=ControllerKind.PID)
    pre = bumped.t <= 50.0
    assert np.array_equal(clean.y[pre], bumped.y[pre])
    assert float(np.max(np.abs(clean.y - bumped.y))) > 1e-3


# --- cost functional ---------------------------------------------------------------------

def test_cost_zero_trajectory():
    t = np.linspace(0.0, 1.0, 11)
    zeros = np.zeros_like(t)
    tr = Trajectory(t=t, y=np.ones_like(t), u=zeros, e=zeros)
    assert cost_J(tr) == 0.0


def test_cost_reduces_to_itae_and_scales_linearly():
    tr = closed_loop_step(P1_N3, TABLE3_P1N3, scfg=FAST, kind=ControllerKind.PID)
    itae = float(np.trapezoid(tr.t * np.abs(tr.e), tr.t))
    assert cost_J(tr, 1.0, 0.0) == itae
    assert cost_J(tr, 2.0, 0.0) == pytest.approx(2.0 * itae, rel=1e-12)
    assert cost_J(tr, 2.0, 2.0) == pytest.approx(2.0 * cost_J(tr), rel=1e-12)


def test_published_pid_cost_p3t5():
    tr = closed_loop_step(P3_T5, TABLE3_P3T5, scfg=FAST, kind=ControllerKind.PID)
    assert cost_J(tr) == pytest.approx(142.1802, rel=0.10)  # printed optimum


def test_cost_stable_under_grid_refinement():
    a = closed_loop_step(P1_N3, TABLE3_P1N3, scfg=SimConfig(dt=0.02),
                         kind=ControllerKind.PID)
    b = closed_loop_step(P1_N3, TABLE3_P1N3, scfg=SimConfig(dt=0.01),
                         kind=ControllerKind.PID)
    assert abs(cost_J(a) - cost_J(b)) / cost_J(b) < 0.005


def test_itae_tail_is_negligible_once_settled():
    tr = closed_loop_step(P1_N3, TABLE3_P1N3, scfg=FAST, kind=ControllerKind.PID)
    J = cost_J(tr)
    tail_mask = tr.t >= 90.0
    tail = float(np.trapezoid(
        (tr.t * np.abs(tr.e))[tail_mask], tr.t[tail_mask]))
    assert tail < 0.05 * J


# --- tuning -----------------------------------------------------------------------------

def test_default_tuning_ga_boxes():
    pid = default_tuning_ga(ControllerKind.PID)
    fopid = default_tuning_ga(ControllerKind.FOPID)
    assert pid.bounds == ((0.0, GAIN_BOUND),) * 3
    assert fopid.bounds == ((0.0, GAIN_BOUND),) * 3 + ((0.0, ORDER_BOUND),) * 2
    assert pid.pop_size == 20 and pid.elite_count == 2


def test_tune_pid_meets_published_band_p2():
    plant = make_testbench(TestBenchSpec(F.P2, 0.1))
    res = tune_controller(plant, ControllerKind.PID, scfg=FAST, seed=3)
    assert res.j_value <= 111.0  # 1.10x the printed 101.0431
    assert res.params.lam == 1.0 and res.params.mu == 1.0
    assert 0.0 <= res.params.Kp <= GAIN_BOUND


def test_tune_fopid_meets_published_band_p1n8():
    plant = make_testbench(TestBenchSpec(F.P1, 8))
    res = tune_controller(plant, ControllerKind.FOPID, scfg=FAST, seed=3)
    assert res.j_value <= 156.0  # 1.10x the printed 141.6016
    assert 0.0 <= res.params.lam <= ORDER_BOUND
    assert 0.0 <= res.params.mu <= ORDER_BOUND


def test_tune_near_integrator_drives_cost_to_zero():
    # the step contract wants a strictly proper plant, so "pure gain" is
    # represented by a 1 ms lag; any healthy tuner result lands far below
    # the cheapest bench PID cost (101.0173)
    fast_plant = make_foptd(1.0, 0.001, 0.0)
    ga = replace(default_tuning_ga(ControllerKind.PID), max_generations=30)
    res = tune_controller(fast_plant, ControllerKind.PID,
                          scfg=SimConfig(dt=0.05, w_isco=0.0), ga_cfg=ga, seed=7)
    assert res.j_value < 101.0173
    assert res.j_value < 1.0
