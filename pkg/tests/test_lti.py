"""Transfer-function core: bench construction, Pade delay, responses, H2."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractune.lti import (
    DelayMode,
    DelayedTF,
    DomainError,
    EvaluationError,
    ParameterError,
    RationalTF,
    TestBenchFamily,
    TestBenchSpec,
    UNITY_TF,
    freq_response,
    freq_response_array,
    h2_norm,
    h2_norm_quadrature,
    is_hurwitz,
    make_foptd,
    make_soptd,
    make_testbench,
    pade3_delay,
    polyadd,
    polymul,
    polysub,
)

F = TestBenchFamily

taus = st.floats(min_value=1e-3, max_value=10.0)
gains = st.floats(min_value=0.1, max_value=10.0)
delays = st.floats(min_value=0.0, max_value=10.0)


# --- polynomials and RationalTF ----------------------------------------------

def test_polymul_matches_convolution():
    a, b = (1.0, 2.0, 3.0), (4.0, 5.0)
    assert polymul(a, b) == tuple(np.convolve(a, b))


def test_polyadd_polysub_align_trailing():
    assert polyadd((1.0, 0.0), (1.0,)) == (1.0, 1.0)
    assert polysub((1.0, 1.0), (1.0,)) == (1.0, 0.0)


def test_rational_trims_leading_zeros():
    p = RationalTF((0.0, 0.0, 2.0), (0.0, 1.0, 1.0))
    assert p.num == (2.0,)
    assert p.den == (1.0, 1.0)


def test_rational_rejects_zero_denominator():
    with pytest.raises(ParameterError):
        RationalTF((1.0,), (0.0,))
    with pytest.raises(ParameterError):
        RationalTF((math.nan,), (1.0,))


def test_eval_at_pole_raises():
    p = RationalTF((1.0,), (1.0, 0.0))  # 1/s
    with pytest.raises(EvaluationError):
        p.eval_at(0.0)


def test_delay_must_be_nonnegative():
    with pytest.raises(ParameterError):
        DelayedTF(UNITY_TF, -0.1)


# --- test bench ---------------------------------------------------------------

def test_bench_p1_n3_is_binomial_cube():
    p = make_testbench(TestBenchSpec(F.P1, 3))
    assert p.tf.num == (1.0,)
    assert p.tf.den == (1.0, 3.0, 3.0, 1.0)
    assert p.delay_L == 0.0


def test_bench_p4_alpha1_has_rhp_zero():
    p = make_testbench(TestBenchSpec(F.P4, 1.0))
    assert p.tf.num == (-1.0, 1.0)
    assert p.tf.den == (1.0, 3.0, 3.0, 1.0)


def test_bench_p2_alpha05_den_matches_convolution_oracle():
    # (1+s)(1+0.5s)(1+0.25s)(1+0.125s), expanded with numpy convolution;
    # every coefficient is an exact dyadic rational so equality is exact.
    den = np.array([1.0])
    for k in range(4):
        den = np.convolve(den, [0.5**k, 1.0])
    p = make_testbench(TestBenchSpec(F.P2, 0.5))
    assert p.tf.den == tuple(den)
    assert p.tf.den == (0.015625, 0.234375, 1.09375, 1.875, 1.0)


@pytest.mark.parametrize("spec", [
    TestBenchSpec(F.P1, 8),
    TestBenchSpec(F.P2, 0.9),
    TestBenchSpec(F.P3, 0.005),
    TestBenchSpec(F.P4, 1.1),
])
def test_bench_dc_gain_is_unity(spec):
    assert make_testbench(spec).tf.dc_gain() == pytest.approx(1.0, abs=1e-12)


def test_bench_labels():
    assert TestBenchSpec(F.P1, 8).label() == "P1_n8"
    assert TestBenchSpec(F.P2, 0.6).label() == "P2_alpha0.6"
    assert TestBenchSpec(F.P3, 5.0).label() == "P3_T5"
    assert TestBenchSpec(F.P4, 0.4).label() == "P4_alpha0.4"


# --- FOPTD / SOPTD templates ----------------------------------------------------

def test_foptd_plain_lag():
    p = make_foptd(1.0, 1.0, 0.0)
    assert p.tf.num == (1.0,)
    assert p.tf.den == (1.0, 1.0)
    assert p.delay_L == 0.0


def test_foptd_published_p1n3_shape():
    p = make_foptd(1.0, 2.321831, 1.035336)
    assert p.tf.den == (2.321831, 1.0)
    assert p.delay_L == 1.035336


def test_foptd_dc_gain_two():
    p = make_foptd(2.0, 1.0, 1.0)
    h = freq_response_array(p, [1e-9])[0]
    assert abs(abs(h) - 2.0) < 1e-12


def test_foptd_rejects_nonpositive_tau():
    with pytest.raises(ParameterError):
        make_foptd(1.0, 0.0, 0.0)
    with pytest.raises(ParameterError):
        make_foptd(1.0, -2.0, 0.0)


def test_soptd_published_rows_expand():
    p = make_soptd(1.0, 1.335035, 1.296596, 0.458524)
    assert p.tf.den == pytest.approx(
        (1.335035 * 1.296596, 1.335035 + 1.296596, 1.0), rel=1e-15)
    q = make_soptd(1.0, 9.999702, 9.998882, 0.98878)
    assert q.tf.den[2] == 1.0
    assert q.delay_L == 0.98878


def test_soptd_equal_lags_is_squared_pole():
    p = make_soptd(1.0, 1.0, 1.0, 0.0)
    assert p.tf.den == (1.0, 2.0, 1.0)


def test_soptd_rejects_misordered_lags():
    with pytest.raises(ParameterError):
        make_soptd(1.0, 0.5, 1.0, 0.0)
    with pytest.raises(ParameterError):
        make_soptd(1.0, 1.0, 0.0, 0.0)


@given(K=gains, t1=taus, t2=taus, L=delays)
def test_soptd_dc_gain_round_trip(K, t1, t2, L):
    tau_max, tau_min = max(t1, t2), min(t1, t2)
    p = make_soptd(K, tau_max, tau_min, L)
    h = freq_response_array(p, [1e-10])[0]
    assert abs(h) == pytest.approx(K, rel=1e-9)


# --- Pade delay -----------------------------------------------------------------

def test_pade3_zero_delay_is_unity():
    p = pade3_delay(0.0)
    assert p.num == (120.0,)
    assert p.den == (120.0,)


def test_pade3_unit_delay_coefficients():
    p = pade3_delay(1.0)
    assert p.num == (-1.0, 12.0, -60.0, 120.0)
    assert p.den == (1.0, 12.0, 60.0, 120.0)


def test_pade3_rejects_negative_delay():
    with pytest.raises(ParameterError):
        pade3_delay(-1.0)


@given(L=st.floats(min_value=1e-6, max_value=100.0),
       omega=st.floats(min_value=1e-6, max_value=100.0))
@settings(max_examples=100)
def test_pade3_is_all_pass(L, omega):
    h = pade3_delay(L).eval_at(1j * omega)
    assert abs(abs(h) - 1.0) < 1e-9


def test_pade3_phase_tracks_delay_below_wl_one():
    # third-order Pade holds the exact phase -omega*L to well under a degree
    # through omega*L = 1
    for wl in np.linspace(1e-3, 1.0, 200):
        ph = np.angle(pade3_delay(wl).eval_at(1j * 1.0))
        assert abs(math.degrees(ph - (-wl))) < 1.0


# --- frequency response -----------------------------------------------------------

def test_freq_response_first_order_anchor():
    (s,) = freq_response(make_foptd(1.0, 1.0, 0.0), [1.0])
    assert s.re == pytest.approx(0.5, abs=1e-15)
    assert s.im == pytest.approx(-0.5, abs=1e-15)


def test_freq_response_pure_delay_pi():
    p = DelayedTF(UNITY_TF, math.pi)
    (s,) = freq_response(p, [1.0])
    assert s.re == pytest.approx(-1.0, abs=1e-12)
    assert abs(s.im) < 1e-12


def test_freq_response_p1n3_complex_oracle():
    # 1/(1+j)^3 = -1/4 - j/4 by hand
    h = freq_response_array(make_testbench(TestBenchSpec(F.P1, 3)), [1.0])[0]
    assert h == pytest.approx(-0.25 - 0.25j, abs=1e-15)


def test_freq_response_rejects_nonpositive_omega():
    with pytest.raises(ParameterError):
        freq_response_array(make_foptd(1.0, 1.0, 0.0), [0.0])


def test_freq_response_exact_vs_pade_modes_at_low_wl():
    p = make_foptd(1.0, 2.0, 0.5)
    w = np.linspace(1e-3, 1.0, 500)  # omega*L <= 0.5
    gap = np.abs(freq_response_array(p, w, DelayMode.EXACT)
                 - freq_response_array(p, w, DelayMode.PADE3))
    assert float(gap.max()) < 1e-3


# --- H2 norm ----------------------------------------------------------------------

def test_h2_norm_first_order_closed_form():
    assert h2_norm(RationalTF((1.0,), (1.0, 1.0))) == pytest.approx(
        1.0 / math.sqrt(2.0), abs=1e-12)


def test_h2_norm_zero_numerator():
    assert h2_norm(RationalTF((0.0,), (1.0, 1.0))) == 0.0


def test_h2_norm_homogeneity():
    base = h2_norm(RationalTF((1.0,), (1.0, 1.0)))
    assert h2_norm(RationalTF((3.0,), (1.0, 1.0))) == pytest.approx(
        3.0 * base, rel=1e-12)


def test_h2_norm_rejects_improper_and_unstable():
    with pytest.raises(DomainError):
        h2_norm(RationalTF((1.0, 1.0), (1.0, 1.0)))
    with pytest.raises(DomainError):
        h2_norm(RationalTF((1.0,), (1.0, -1.0)))


def test_is_hurwitz_basic_rows():
    assert is_hurwitz((1.0, 1.0, 1.0))
    assert not is_hurwitz((1.0, 0.0, 1.0))
    assert not is_hurwitz((1.0, -1.0, 1.0))


def test_h2_lyapunov_matches_quadrature_on_random_stable_systems():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        # build a guaranteed-Hurwitz denominator from random first- and
        # second-order factors, order <= 6
        den = (1.0,)
        order = int(rng.integers(1, 7))
        while len(den) - 1 < order:
            if order - (len(den) - 1) >= 2 and rng.random() < 0.5:
                wn = rng.uniform(0.1, 5.0)
                zeta = rng.uniform(0.05, 2.0)
                den = polymul(den, (1.0, 2.0 * zeta * wn, wn * wn))
            else:
                den = polymul(den, (1.0, rng.uniform(0.1, 3.0)))
        num = tuple(rng.uniform(-2.0, 2.0, len(den) - 1))
        p = RationalTF(num, den)
        if p.is_zero:
            continue
        a, b = h2_norm(p), h2_norm_quadrature(p)
        assert a == pytest.approx(b, rel=1e-6)
