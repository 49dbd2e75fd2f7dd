import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groundctl import (AdmissibilityViolated, ConeViolated, ControlConfig, StripViolated, calibrate_r1,
                       run_cone_control, run_local_control, run_strip_control, simulate_bilinear,
                       simulate_linearized, synthesize_stage_control)
from groundctl.report import u_samples
from groundctl.synthesis import induction_bound

PI2 = math.pi**2
R1 = 2.0**-10


def e(k, n=8):
    x = np.zeros(n)
    x[k - 1] = 1.0
    return x


def test_ground_state_is_fixed(dirichlet8):
    rep = run_local_control(dirichlet8, e(1), 1.0)
    assert rep.converged and rep.n_stages == 0
    assert rep.final_relative_deviation == 0.0
    assert rep.control.l2_norm == 0.0


def test_local_run_converges(local_run):
    assert local_run.converged
    assert local_run.n_stages <= 8
    assert local_run.final_relative_deviation <= 1e-12
    assert all(s.gate <= 1.0 for s in local_run.stages)
    assert local_run.status == "converged"
    norms = local_run.norm_sequence
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_local_run_bookkeeping(local_run):
    sched = local_run.schedule
    for s, (a, b) in zip(local_run.stages, zip(sched.breakpoints, sched.breakpoints[1:])):
        assert (s.start, s.end) == (a, b)
        assert s.residual <= 1e-8
        assert s.linearized_end <= 10 * s.residual * s.norm_start / np.min(np.abs(local_run.model.ground_coupling))
    assert local_run.control.l2_norm == pytest.approx(local_run.total_control_norm, rel=1e-14)
    assert local_run.final_deviation == pytest.approx(
        math.exp(-local_run.lam1 * local_run.final_time) * local_run.final_relative_deviation, rel=1e-14)


def test_control_reproduces_run(dirichlet8, local_run):
    """Replaying the recorded control on the unshifted system lands on the target."""
    T_end = local_run.final_time
    u0 = e(1) + 1e-3 * (e(2) + e(3)) / math.sqrt(2)
    tr = simulate_bilinear(dirichlet8, u0, local_run.control, (0, T_end), tol=1e-12)
    target = math.exp(-PI2 * T_end) * e(1)
    rel = np.linalg.norm(tr.final - target) / math.exp(-PI2 * T_end)
    assert rel <= 1e-11


def test_u_samples_shape(local_run):
    t, p, dev, u = u_samples(local_run)
    assert t.size == p.size == dev.size == u.shape[0]
    assert u.shape[1] == 8
    assert np.all(np.diff(t) > 0)
    assert dev[0] == pytest.approx(1e-3, rel=1e-12)


@settings(max_examples=12, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_linearized_exactness(shifted8, v):
    v = 1e-3 * np.asarray(v) / np.linalg.norm(v)
    T = 1 / PI2
    ctl = synthesize_stage_control(shifted8, v, T)
    vbar = simulate_linearized(shifted8, v, ctl, (0, T)).final
    bound = 10 * ctl.basis.max_residual * 1e-3 / np.min(np.abs(shifted8.ground_coupling))
    assert np.linalg.norm(vbar) <= bound


def test_theory_mode_rejects_large_v0(dirichlet8):
    u0 = e(1) + 1e-3 * e(2)
    with pytest.raises(AdmissibilityViolated) as exc:
        run_local_control(dirichlet8, u0, 1.0, ControlConfig(mode="theory", c_k=1.0))
    assert exc.value.details["R_T"] == pytest.approx(math.exp(-6 * PI2), rel=1e-12)
    assert exc.value.report is not None and exc.value.report.n_stages == 0


def test_theory_mode_tiny_v0(dirichlet8):
    rep = run_local_control(dirichlet8, e(1) + 1e-9 * e(2), 1.0,
                            ControlConfig(mode="theory", c_k=0.01, c_bar=2.0))
    assert rep.converged
    assert all(s.norm_start <= s.induction_bound for s in rep.stages)


def test_gate_violation_keeps_partial_report(dirichlet8):
    with pytest.raises(AdmissibilityViolated) as exc:
        run_local_control(dirichlet8, e(1) + 0.5 * e(2), 1.0)
    rep = exc.value.report
    assert rep.status == "admissibility-violated"
    assert exc.value.details["gate"] > 1


def test_stage_budget_exhausted(dirichlet8):
    rep = run_local_control(dirichlet8, e(1) + 1e-3 * e(2), 1.0, ControlConfig(j_max=1))
    assert not rep.converged and rep.status == "not-converged" and rep.n_stages == 1


def test_induction_bound_values():
    # n = 1: exp(-6 C_K / T~)
    assert induction_bound(1, 1.0, 1 / PI2) == pytest.approx(math.exp(-6 * PI2))
    # the exponent sum_{j<n} 2^{n-1-j} j^2 - 6 2^{n-1} equals -(n-1)^2 - 4(n-1) - 6 (closed form)
    for n in range(1, 12):
        x = math.log(induction_bound(n, 1e-3, 1.0)) / 1e-3
        assert x == pytest.approx(-((n - 1) ** 2 + 4 * (n - 1) + 6), rel=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        ControlConfig(mode="fast")
    with pytest.raises(ValueError):
        ControlConfig(tol=0)
    with pytest.raises(ValueError):
        run_local_control(None or __import__("groundctl").build_model("dirichlet-heat", 4), np.zeros(3), 1.0)


# -- strip and cone ----------------------------------------------------------

def test_calibrate_r1(dirichlet8):
    assert calibrate_r1(dirichlet8, ControlConfig(seed=0)) == R1


def test_strip_phase_duration(dirichlet8):
    u0 = e(1) + 9e-3 * e(2)
    rep = run_strip_control(dirichlet8, u0, 10 * R1, ControlConfig(r1=R1))
    ph = rep.phases
    assert abs(ph["t_R"] - math.log(100) / (6 * PI2)) <= 1e-12
    assert ph["t_R"] == pytest.approx(0.077767, abs=1e-6)
    assert ph["post_phase_deviation_sq"] < 2 * R1 * R1
    assert rep.converged and rep.final_relative_deviation <= 1e-12
    assert all(s.gate <= 1 for s in rep.stages)
    assert rep.stages[0].start == ph["t_R"]


def test_strip_skips_phase_one(dirichlet8):
    rep = run_strip_control(dirichlet8, e(1) + 5e-4 * e(2), 5e-4, ControlConfig(r1=R1))
    assert rep.phases["t_R"] == 0.0
    assert rep.converged


def test_strip_rejects_zero_ground_component(dirichlet8):
    with pytest.raises(StripViolated):
        run_strip_control(dirichlet8, 0.1 * e(2), 1.0, ControlConfig(r1=0.5))


def test_cone_zero_state(dirichlet8):
    rep = run_cone_control(dirichlet8, np.zeros(8), 1.0, ControlConfig(r1=R1))
    assert rep.converged and rep.final_deviation == 0.0 and rep.control.l2_norm == 0.0


def test_cone_rejects_gamma_zero(dirichlet8):
    with pytest.raises(ConeViolated):
        run_cone_control(dirichlet8, 0.1 * e(2), 1.0, ControlConfig(r1=R1))


def test_cone_converges_to_scaled_target(dirichlet8):
    u0 = 2 * e(1) + 0.1 * e(2)
    rep = run_cone_control(dirichlet8, u0, 1.0, ControlConfig(r1=R1))
    assert rep.converged and rep.scale == 2.0
    assert rep.final_relative_deviation <= 1e-12
    # gamma-rescaling: u(t; p, c u0) = c u(t; p, u0)
    T_end = rep.final_time
    a = simulate_bilinear(dirichlet8, u0 / 2, rep.control, (0, T_end), samples=8)
    b = simulate_bilinear(dirichlet8, u0, rep.control, (0, T_end), samples=8)
    scale = np.max(np.abs(b.states), axis=1)
    assert np.all(np.max(np.abs(b.states - 2 * a.states), axis=1) <= 1e-12 * scale)
    # replay the full state; its error floor is tol * ||u||, so integrate tightly
    c = simulate_bilinear(dirichlet8, u0, rep.control, (0, T_end), tol=1e-13)
    target = 2 * math.exp(-PI2 * T_end) * e(1)
    assert np.linalg.norm(c.final - target) / np.linalg.norm(target) <= 1e-11


def test_cone_rejects_outside_cone(dirichlet8):
    with pytest.raises(ConeViolated):
        run_cone_control(dirichlet8, e(1) + 0.5 * e(2), 0.1, ControlConfig(r1=R1))
