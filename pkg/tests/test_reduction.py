"""Reduction objectives and the GA template fits against the published tables."""

import math

import pytest

from fractune.ga import GAConfig
from fractune.lti import (
    DelayedTF,
    ParameterError,
    RationalTF,
    TestBenchFamily,
    TestBenchSpec,
    make_foptd,
    make_soptd,
    make_testbench,
)
from fractune.published import load_h2_reductions, load_nyquist_reductions
from fractune.reduction import (
    PARAM_HI,
    PARAM_LO,
    FrequencyGrid,
    Objective,
    ObjectiveConfig,
    Template,
    default_reduction_ga,
    j_h2,
    j_nyquist,
    reduce_plant,
)

F = TestBenchFamily
P1_N3 = TestBenchSpec(F.P1, 3)
P1_N8 = TestBenchSpec(F.P1, 8)
P2_A01 = TestBenchSpec(F.P2, 0.1)


def nyquist_row(spec):
    return next(r for r in load_nyquist_reductions() if r.spec == spec)


def warm_soptd(plant, seed):
    """FOPTD fit first, then the SOPTD search seeded from it."""
    f = reduce_plant(plant, Template.FOPTD, seed=seed)
    m = f.model
    s = reduce_plant(
        plant, Template.SOPTD, seed=seed,
        initial_guesses=[(m.tau_max, PARAM_LO, m.L), (m.tau_max, m.tau_max, m.L)],
    )
    return f, s


# --- config types ---------------------------------------------------------------

def test_grid_points_hit_endpoints_log_spaced():
    g = FrequencyGrid(1e-2, 1e2, 5)
    pts = g.points()
    assert pts[0] == pytest.approx(1e-2, rel=1e-12)
    assert pts[-1] == pytest.approx(1e2, rel=1e-12)
    assert pts[2] == pytest.approx(1.0, rel=1e-12)


def test_grid_hz_flag_scales_by_two_pi():
    g = FrequencyGrid(1e-2, 1e2, 3, in_hz=True)
    assert g.points()[0] == pytest.approx(2.0 * math.pi * 1e-2, rel=1e-12)


def test_grid_validation():
    with pytest.raises(ParameterError):
        FrequencyGrid(1.0, 1.0)
    with pytest.raises(ParameterError):
        FrequencyGrid(0.0, 1.0)
    with pytest.raises(ParameterError):
        FrequencyGrid(1e-2, 1e2, count=1)


def test_objective_config_rejects_negative_weights():
    with pytest.raises(ParameterError):
        ObjectiveConfig(weight_re=-1.0)


def test_default_reduction_ga_shapes():
    f = default_reduction_ga(Template.FOPTD)
    s = default_reduction_ga(Template.SOPTD)
    assert f.bounds == ((PARAM_LO, PARAM_HI),) * 2
    assert s.bounds == ((PARAM_LO, PARAM_HI),) * 3
    assert f.log_init and s.log_init


# --- H2 objective ------------------------------------------------------------------

def test_j_h2_identical_systems_is_zero():
    p = make_testbench(P1_N3)
    assert j_h2(p, p) == 0.0


def test_j_h2_against_zero_model_is_h2_norm():
    p = make_foptd(1.0, 1.0, 0.0)
    zero = DelayedTF(RationalTF((0.0,), (1.0, 1.0)))
    assert j_h2(p, zero) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-9)


@pytest.mark.xfail(
    strict=True,
    reason="the published J for this parameter set is five orders of "
    "magnitude below the mismatch norm those parameters actually produce "
    "(0.0767 vs 1.48e-7); kept failing so a fix would surface",
)
def test_j_h2_reproduces_published_optimum_p1n3():
    row = next(r for r in load_h2_reductions() if r.spec == P1_N3)
    red = make_soptd(1.0, row.soptd_tau_max, row.soptd_tau_min, row.soptd_L)
    assert j_h2(make_testbench(P1_N3), red) <= 10.0 * row.soptd_J


# --- Nyquist objective ----------------------------------------------------------------

def test_j_nyquist_identical_systems_is_zero():
    p = make_testbench(P1_N3)
    assert j_nyquist(p, p) == 0.0


def test_j_nyquist_reproduces_published_p1n3_soptd():
    row = nyquist_row(P1_N3)
    red = make_soptd(1.0, row.soptd_tau_max, row.soptd_tau_min, row.soptd_L)
    val = j_nyquist(make_testbench(P1_N3), red)
    assert val == pytest.approx(row.soptd_J, rel=0.20)  # printed 0.35763


def test_j_nyquist_reproduces_published_p2_foptd():
    row = nyquist_row(P2_A01)
    red = make_foptd(1.0, row.foptd_tau, row.foptd_L)
    val = j_nyquist(make_testbench(P2_A01), red)
    assert val == pytest.approx(row.foptd_J, rel=0.20)  # printed 0.344204


def test_j_nyquist_linear_in_weights():
    p = make_testbench(P1_N3)
    red = make_foptd(1.0, 2.321831, 1.035336)
    one = j_nyquist(p, red, ObjectiveConfig(weight_re=1.0, weight_im=1.0))
    two = j_nyquist(p, red, ObjectiveConfig(weight_re=2.0, weight_im=2.0))
    assert two == pytest.approx(2.0 * one, rel=1e-12)


# --- the GA search -------------------------------------------------------------------

def test_reduce_recovers_exact_first_order_plant():
    # the default box keeps L >= 1e-4, which floors the objective around
    # 1e-4; recovery to the example's precision needs a box whose delay edge
    # sits at ~0 and a mutation schedule that anneals far enough to polish
    ga = GAConfig(
        bounds=((PARAM_LO, PARAM_HI), (1e-9, PARAM_HI)), pop_size=50,
        elite_count=2, max_generations=150, stall_generations=150,
        log_init=True, mutation_scale_final=1e-9,
    )
    rec = reduce_plant(make_foptd(1.0, 3.0, 0.0), Template.FOPTD, ga_cfg=ga, seed=5)
    assert abs(rec.model.tau_max - 3.0) < 1e-3
    assert rec.model.L < 1e-3
    assert rec.j_value < 1e-6


def test_reduce_p2_alpha01_soptd_meets_published_band():
    plant = make_testbench(P2_A01)
    f, s = warm_soptd(plant, seed=11)
    assert s.j_value <= 0.01  # printed optimum 0.004308
    assert s.j_value <= f.j_value
    assert s.model.tau_max >= s.model.tau_min
    assert s.j_value >= 0.0


def test_reduce_p1_n8_soptd_within_twice_published():
    plant = make_testbench(P1_N8)
    f, s = warm_soptd(plant, seed=11)
    assert s.j_value <= 1.7  # 2x the printed 0.82832
    assert s.j_value <= f.j_value


def test_reduce_deterministic_per_seed():
    plant = make_testbench(P2_A01)
    ga = GAConfig(bounds=((PARAM_LO, PARAM_HI),) * 2, pop_size=12,
                  elite_count=2, max_generations=15, stall_generations=15,
                  log_init=True)
    a = reduce_plant(plant, Template.FOPTD, ga_cfg=ga, seed=7)
    b = reduce_plant(plant, Template.FOPTD, ga_cfg=ga, seed=7)
    assert a.j_value == b.j_value
    assert a.model == b.model
    assert a.history == b.history


def test_enum_round_trips():
    assert Template("foptd") is Template.FOPTD
    assert Objective("nyquist") is Objective.NYQUIST
    assert Objective("h2") is Objective.H2
