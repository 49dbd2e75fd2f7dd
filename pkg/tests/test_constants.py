import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groundctl import ConstantsConfig, build_model, c_alpha, lambda_T, stage_schedule, theoretical_constants
from groundctl.constants import (calibrate_c_m, log_c_alpha_sq, log_g_m, log_k_sq, log_k_sq_kt,
                                 p_bound_sq, series_tail)
from groundctl.simulate import shift_spectrum

PI2 = math.pi**2


def row(k):
    if k == 1:
        return (2 * PI2 - 3) / (6 * PI2)
    return 8 * k * (-1) ** (k - 1) / (PI2 * (k * k - 1) ** 2)


def log_lambda_sq_oracle(T, shifted, m, k_from=1, k_to=400):
    """log sum_k exp(-2 mu_k T + m sqrt(mu_k)) / c_k^2 for the Dirichlet x^2 model,
    mu_k = (k^2 - s) pi^2 with s = 1 when shifted."""
    with mpmath.workdps(40):
        s = 1 if shifted else 0
        mus = [(k * k - s) * mpmath.pi**2 for k in range(k_from, k_to + 1)]
        total = mpmath.fsum(
            mpmath.exp(-2 * mu * T + m * mpmath.sqrt(mu)) / mpmath.mpf(row(k)) ** 2
            for k, mu in zip(range(k_from, k_to + 1), mus)
        )
        return float(mpmath.log(total))


def lambda_sq_oracle(T, shifted, m):
    return math.exp(log_lambda_sq_oracle(T, shifted, m))


def test_schedule_examples():
    s = stage_schedule(1.0, math.pi)
    assert s.T_alpha == pytest.approx(1 / 6, rel=1e-15)
    assert s.T_f == pytest.approx(1 / 6, rel=1e-15)
    assert s.T_tilde == pytest.approx(1 / PI2, rel=1e-15)
    assert s.lengths[0] == pytest.approx(0.101321, abs=1e-6)
    assert s.lengths[1] == pytest.approx(0.0253303, abs=1e-7)
    s2 = stage_schedule(0.1, 2.0)
    assert s2.T_alpha == pytest.approx(PI2 / 24, rel=1e-15)
    assert s2.T_f == 0.1


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 10.0), st.floats(0.1, 10.0), st.integers(1, 40))
def test_schedule_exhaustion(T, alpha, j_max):
    s = stage_schedule(T, alpha, j_max)
    remaining = s.T_f - s.breakpoints[-1]
    exact = s.T_tilde * (PI2 / 6 - sum(1 / j**2 for j in range(1, j_max + 1)))
    assert remaining > 0
    assert remaining == pytest.approx(exact, rel=1e-9, abs=1e-15)
    assert remaining <= s.T_tilde / j_max
    assert np.all(np.diff(s.breakpoints) > 0)


def test_schedule_rejects_bad_input():
    with pytest.raises(ValueError):
        stage_schedule(0.0, 1.0)
    with pytest.raises(ValueError):
        stage_schedule(1.0, 1.0, 0)


def test_lambda_T_unshifted_half():
    m = build_model("dirichlet-heat", 8)
    lam, head, tail_sq = lambda_T(m, 0.5)
    truth = math.sqrt(lambda_sq_oracle(0.5, False, 1 / math.pi))
    assert head <= truth * (1 + 1e-14) <= lam * (1 + 1e-14)
    assert lam == pytest.approx(truth, rel=1e-12)
    assert tail_sq < 1e-12
    assert lam == pytest.approx(0.0420, abs=1e-4)
    # dominated by the k = 1 term
    assert lam == pytest.approx(math.sqrt(math.exp(-PI2 + 1) / row(1) ** 2), rel=1e-6)


@pytest.mark.parametrize("T", [0.002, 0.01, 0.1 / PI2, 1 / PI2, 0.5])
def test_lambda_T_shifted_brackets_truth(T, shifted8):
    lam, head, _ = lambda_T(shifted8, T)
    truth = math.sqrt(lambda_sq_oracle(T, True, 1 / math.pi))
    assert head <= truth * (1 + 1e-12)
    assert truth <= lam * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.003, 1.0), st.floats(0.0, 3.0))
def test_tail_bound_dominates_tail(T, m):
    model = build_model("dirichlet-heat", 8)
    shifted = shift_spectrum(model)[0]
    for mod, sh in ((model, False), (shifted, True)):
        bound = series_tail(mod, T, m)
        assert log_lambda_sq_oracle(T, sh, m, k_from=9) <= bound + 1e-12


def test_c_alpha_branches():
    assert c_alpha(0.5, math.pi) == pytest.approx(math.pi, rel=1e-15)
    T = 0.05
    expect = math.sqrt((1 / T + 1 / (T * T * PI2)) * math.exp(1 / (T * PI2)))
    assert c_alpha(T, math.pi) == pytest.approx(expect, rel=1e-14)
    # the two branches do not meet at T = 1/alpha^2
    left = math.exp(0.5 * log_c_alpha_sq(1 / PI2, math.pi))
    right = math.exp(0.5 * log_c_alpha_sq(1 / PI2 * (1 + 1e-12), math.pi))
    assert left == pytest.approx(math.sqrt(2 * math.e) * math.pi, rel=1e-12)
    assert right == pytest.approx(math.pi, rel=1e-12)


def test_R_T_example(shifted8):
    c = theoretical_constants(shifted8, 1.0, ConstantsConfig(c_k=1.0))
    assert c.T_f == pytest.approx(1 / 6)
    assert c.log_R_T == pytest.approx(-6 * PI2, rel=1e-14)
    assert c.R_T == pytest.approx(math.exp(-6 * PI2), rel=1e-12)
    assert c.R_T == pytest.approx(1.9e-26, rel=0.1)


def test_calibrated_constants(shifted8):
    c = theoretical_constants(shifted8, 1.0)
    assert math.isfinite(c.c_m) and math.isfinite(c.c_k)
    assert c.c_k >= 1.05 * c.c_m * (1 - 1e-15)
    assert c.c_k >= 1.05 * c.k_exponent * (1 - 1e-15)
    assert c.R_T == pytest.approx(math.exp(-PI2 * c.c_k * 6), rel=1e-12)
    d = c.to_dict()
    assert d["schedule"]["T_f"] == c.T_f


@pytest.mark.parametrize("T", [1e-3, 0.01, 1 / PI2, 0.3, 1.0])
def test_k_forms_agree(T, shifted8):
    assert log_k_sq(shifted8, T) == pytest.approx(log_k_sq_kt(shifted8, T), rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("T", [1e-3, 0.02, 0.5])
def test_k_bound_respects_calibration(T, shifted8):
    c = theoretical_constants(shifted8, 1.0)
    assert 0.5 * log_k_sq(shifted8, T) <= c.c_k / T


def test_p_bound_formula():
    a = PI2 * 2.0 / 0.25
    assert p_bound_sq(2.0, 0.25) == pytest.approx(math.exp(-a) / math.expm1(2 * a / 3), rel=1e-13)
    assert p_bound_sq(1e4, 1e-3) == 0.0


def test_gm_self_consistency(shifted8):
    T = 0.2
    c_m, t_star = calibrate_c_m(shifted8, 1.0, (T, T, 1))
    assert c_m == pytest.approx(T * log_g_m(shifted8, T), rel=1e-15)
    assert t_star == T


def test_gm_bounded_uniformly(dirichlet8):
    vals = [T * log_g_m(dirichlet8, T) for T in np.geomspace(1e-2, 1, 30)]
    assert all(math.isfinite(v) for v in vals)
    assert max(vals) < 10.0
