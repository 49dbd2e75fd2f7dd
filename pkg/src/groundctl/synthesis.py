"""Control synthesis: stage controls, the local iteration and the global strategies.

All runs work on the shifted system z = e^{lambda_1 t} u, whose spectrum
mu_k = lambda_k - lambda_1 starts at 0, and on the deviation v = z - phi_1::

    v' = -mu v - p(t) (B v + B phi_1)

Stage n uses p_n(t) = sum_k v_k(tau_{n-1}) / c_{1k} sigma_k(t - tau_{n-1}) on
[tau_{n-1}, tau_n], with c_{1k} = <B phi_1, phi_k>.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .constants import (ConstantsConfig, c_alpha, lambda_T, log_k_sq, stage_schedule,
                        theoretical_constants)
from .controls import PiecewiseControl, StageControl
from .errors import (AdmissibilityViolated, ConeViolated, ContractionFailure,
                     ControlFailure, NumericalFailure, StripViolated)
from .moments import PrecisionConfig, biorthogonal_family
from .report import RunReport, StageRecord
from .simulate import (Trajectory, propagate_free, shift_spectrum,
                       simulate_bilinear, simulate_linearized)

log = logging.getLogger(__name__)

MODES = ("empirical", "theory")


@dataclass(frozen=True)
class ControlConfig:
    mode: str = "empirical"
    target: float = 1e-12
    j_max: int = 12
    c_bar: float = 1.0
    c_k: float = None
    c_m: float = None
    tol: float = 1e-10
    samples: int = 32
    precision: PrecisionConfig = field(default_factory=PrecisionConfig)
    r1: float = None
    seed: int = 0
    n_random_probes: int = 4
    calibration_grid: tuple = (1e-3, 1.0, 61)
    linearized: bool = True
    floor_rel: float = 1e-14

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.target >= 0 and self.tol > 0 and self.c_bar > 0 and self.j_max >= 1):
            raise ValueError("target >= 0, tol > 0, c_bar > 0 and j_max >= 1 required")

    def constants_config(self):
        return ConstantsConfig(c_bar=self.c_bar, c_k=self.c_k, c_m=self.c_m, grid=self.calibration_grid)


@lru_cache(maxsize=512)
def _family(mu_key, T, ladder, tol, max_bits):
    return biorthogonal_family(np.array(mu_key), T, PrecisionConfig(ladder, tol, max_bits))


def _is_shifted(model):
    lam = model.eigenvalues
    return abs(lam[0]) <= 1e-12 * max(1.0, abs(lam[-1]))


def synthesize_stage_control(model, v_state, stage_length, start=0.0, end=None, index=1,
                             precision_cfg=None):
    """Moment control steering the linearized deviation from ``v_state`` to 0.

    ``model`` must be shifted (first eigenvalue 0).
    """
    if not _is_shifted(model):
        raise ValueError("synthesize_stage_control needs a shifted model (mu_1 = 0)")
    if not stage_length > 0:
        raise ValueError("stage_length must be positive")
    pc = precision_cfg or PrecisionConfig()
    basis = _family(tuple(float(m) for m in model.eigenvalues), float(stage_length),
                    tuple(pc.ladder), float(pc.residual_tol), pc.max_bits)
    end = start + stage_length if end is None else end
    return StageControl(index, float(start), float(end), np.asarray(v_state, dtype=float),
                        model.ground_coupling, basis)


def induction_bound(n, c_k, T_tilde):
    """Bound exp((sum_{j<n} 2^{n-1-j} j^2 - 6 * 2^{n-1}) C_K / T~) on ||v(tau_{n-1})||."""
    s = sum(2 ** (n - 1 - j) * j * j for j in range(1, n))
    x = (s - 6 * 2 ** (n - 1)) * c_k / T_tilde
    return math.exp(x) if x > -745 else 0.0


def _concat(trajs):
    trajs = [t for t in trajs if t is not None and len(t)]
    if not trajs:
        return None
    times, states, ctl, errs = [trajs[0].times], [trajs[0].states], [trajs[0].controls], [trajs[0].errors]
    for tr in trajs[1:]:
        times.append(tr.times[1:])
        states.append(tr.states[1:])
        ctl.append(tr.controls[1:])
        errs.append(tr.errors)
    return Trajectory(np.concatenate(times), np.concatenate(states), np.concatenate(ctl),
                      np.concatenate(errs), max(t.sup_norm for t in trajs),
                      sum(t.n_steps for t in trajs), sum(t.n_rejected for t in trajs))


def _run_shifted(shifted, lam1, z0, T, cfg, t0=0.0, strategy="local", constants=None,
                 pre=None):
    """Stage iteration on the shifted system from z(t0) = z0."""
    alpha = shifted.gap_alpha
    sched = stage_schedule(T, alpha, cfg.j_max)
    consts = constants or theoretical_constants(shifted, T, cfg.constants_config())
    g1 = np.ascontiguousarray(shifted.ground_coupling, dtype=float)
    e1 = np.zeros(shifted.n_modes)
    e1[0] = 1.0
    v = np.asarray(z0, dtype=float) - e1
    v0n = float(np.linalg.norm(v))
    floor = cfg.floor_rel * v0n

    base = RunReport(
        strategy=strategy, mode=cfg.mode, T=float(T), target=cfg.target, lam1=lam1,
        v0_norm=v0n, c_b=shifted.operator_norm_b, constants=consts, schedule=sched,
        model=shifted, start_time=float(t0),
    )
    records, stages, trajs = [], [], [pre]

    def partial(status, error):
        ctl = PiecewiseControl(tuple(stages))
        vn = float(np.linalg.norm(v))
        tf = t0 + sched.breakpoints[len(records)]
        return replace(
            base, stages=tuple(records), control=ctl, trajectory=_concat(trajs),
            converged=vn <= cfg.target, final_time=tf, final_relative_deviation=vn,
            final_deviation=math.exp(-lam1 * tf) * vn, status=status, error=error,
        )

    if cfg.mode == "theory" and not v0n < consts.R_T:
        raise AdmissibilityViolated(
            f"||v0|| = {v0n:.6g} is not below R_T = {consts.R_T:.6g} (C_K = {consts.c_k:.6g})",
            report=partial("admissibility-violated", "AdmissibilityViolated"),
            R_T=consts.R_T, v0_norm=v0n,
        )

    for n in range(1, cfg.j_max + 1):
        vn = float(np.linalg.norm(v))
        if vn <= cfg.target:
            break
        Tn = sched.lengths[n - 1]
        a, b = t0 + sched.breakpoints[n - 1], t0 + sched.breakpoints[n]
        lam_T = lambda_T(shifted, Tn, cfg.c_bar)[0]
        ca = c_alpha(Tn, alpha, cfg.c_bar)
        gate = ca * lam_T * vn
        ib = induction_bound(n, consts.c_k, sched.T_tilde)
        if not gate <= 1.0:
            raise AdmissibilityViolated(
                f"stage {n}: gate C_alpha(T_n) Lambda_T_n ||v|| = {gate:.6g} > 1",
                report=partial("admissibility-violated", "AdmissibilityViolated"),
                stage=n, gate=gate, R_T=consts.R_T,
            )
        if cfg.mode == "theory" and not vn <= ib:
            raise AdmissibilityViolated(
                f"stage {n}: ||v(tau_(n-1))|| = {vn:.6g} above the induction bound {ib:.6g}",
                report=partial("admissibility-violated", "AdmissibilityViolated"),
                stage=n, R_T=consts.R_T,
            )
        stage = synthesize_stage_control(shifted, v, Tn, start=a, end=b, index=n,
                                         precision_cfg=cfg.precision)
        tr = simulate_bilinear(shifted, v, stage, (a, b), tol=cfg.tol, forcing=g1,
                               samples=cfg.samples, scale_ref=vn)
        lin_end = math.nan
        if cfg.linearized:
            local = StageControl(n, 0.0, Tn, stage.deviation, stage.coupling_row, stage.basis)
            lin_end = float(np.linalg.norm(simulate_linearized(shifted, v, local, (0.0, Tn)).final))
        v = tr.final
        rec = StageRecord(
            n=n, length=Tn, start=a, end=b, norm_start=vn, norm_end=float(np.linalg.norm(v)),
            control_norm=stage.l2_norm, gate=gate, residual=stage.basis.max_residual,
            precision=stage.basis.precision, sup_norm=tr.sup_norm, lambda_T=lam_T,
            c_alpha=ca, log_K=0.5 * log_k_sq(shifted, Tn, cfg.c_bar), linearized_end=lin_end,
            n_steps=tr.n_steps, induction_bound=ib,
        )
        records.append(rec)
        stages.append(stage)
        trajs.append(tr)
        log.debug("stage %d: %.3e -> %.3e (gate %.3g)", n, vn, rec.norm_end, gate)
        if n >= 3 and rec.norm_end >= vn and vn > floor:
            raise ContractionFailure(
                f"stage {n}: ||v|| grew from {vn:.6g} to {rec.norm_end:.6g}",
                report=partial("contraction-failure", "ContractionFailure"), stage=n,
            )
    return partial("converged" if np.linalg.norm(v) <= cfg.target else "not-converged", None)


def run_local_control(model, u0_modal, T, cfg=None, constants=None):
    """Steer u0 to the ground state solution psi_1(t) = e^{-lambda_1 t} phi_1.

    Raises
    ------
    AdmissibilityViolated, ContractionFailure
        With the partial report attached as ``exc.report``.
    """
    cfg = cfg or ControlConfig()
    shifted, lam1 = shift_spectrum(model)
    u0 = np.asarray(u0_modal, dtype=float)
    if u0.shape != (model.n_modes,):
        raise ValueError(f"u0 must have length {model.n_modes}")
    return _run_shifted(shifted, lam1, u0, T, cfg, constants=constants)


def _probe(shifted, lam1, z0, cfg, constants):
    try:
        rep = _run_shifted(shifted, lam1, z0, 1.0, cfg, constants=constants)
    except (ControlFailure, NumericalFailure):
        return False
    return rep.converged


def calibrate_r1(model, cfg=None, seed=None, max_power=20):
    """Largest r1 = 2^-i (i = 1..max_power) such that the local run at T = 1
    converges from phi_1 + sqrt(2) r1 d for every probed unit direction d.

    Directions are e_2..e_N plus ``cfg.n_random_probes`` seeded random ones.
    """
    cfg = cfg or ControlConfig()
    seed = cfg.seed if seed is None else seed
    shifted, lam1 = shift_spectrum(model)
    probe_cfg = replace(cfg, samples=0, linearized=False, mode="empirical")
    consts = theoretical_constants(shifted, 1.0, cfg.constants_config())
    n = model.n_modes
    dirs = [np.eye(n)[k] for k in range(1, n)]
    rng = np.random.default_rng(seed)
    for _ in range(cfg.n_random_probes):
        d = rng.standard_normal(n)
        dirs.append(d / np.linalg.norm(d))
    e1 = np.eye(n)[0]
    for i in range(1, max_power + 1):
        r1 = 2.0 ** -i
        eps = math.sqrt(2.0) * r1
        if all(_probe(shifted, lam1, e1 + eps * d, probe_cfg, consts) for d in dirs):
            return r1
    raise AdmissibilityViolated(f"no radius 2^-i, i <= {max_power}, passed every probe")


def run_strip_control(model, u0_modal, R, cfg=None):
    """Free decay until the deviation is within the local radius, then the local run at T = 1."""
    cfg = cfg or ControlConfig()
    u0 = np.asarray(u0_modal, dtype=float)
    r1 = cfg.r1 if cfg.r1 is not None else calibrate_r1(model, cfg)
    gamma = float(u0[0])
    perp = float(np.linalg.norm(u0[1:]))
    if not abs(gamma - 1.0) < r1:
        raise StripViolated(f"|<u0, phi_1> - 1| = {abs(gamma - 1):.6g} is not below r1 = {r1:.6g}",
                            r1=r1, gamma=gamma)
    if not perp <= R:
        raise StripViolated(f"||u0 - <u0, phi_1> phi_1|| = {perp:.6g} exceeds R = {R:.6g}", R=R)
    shifted, lam1 = shift_spectrum(model)
    mu2 = float(shifted.eigenvalues[1])
    t_R = max(0.0, math.log(R / r1) / mu2) if R > 0 else 0.0
    z = propagate_free(shifted, u0, t_R)
    e1 = np.zeros(model.n_modes)
    e1[0] = 1.0
    dev_sq = float(np.sum((z - e1) ** 2))
    if not dev_sq < 2.0 * r1 * r1:
        raise StripViolated(f"deviation^2 {dev_sq:.6g} after free decay is not below 2 r1^2",
                            t_R=t_R, deviation_sq=dev_sq)
    pre = None
    if t_R > 0:
        ts = np.linspace(0.0, t_R, max(cfg.samples, 1) + 1)
        st = np.array([propagate_free(shifted, u0, t) - e1 for t in ts])
        pre = Trajectory(ts, st, np.zeros(ts.size), np.zeros(ts.size - 1),
                         float(np.max(np.linalg.norm(st, axis=1))))
    rep = _run_shifted(shifted, lam1, z, 1.0, cfg, t0=t_R, strategy="strip", pre=pre)
    phases = {"t_R": t_R, "r1": r1, "R": float(R), "mu_2": mu2,
              "post_phase_deviation_sq": dev_sq, "post_phase_bound": 2.0 * r1 * r1,
              "T_R": t_R + 1.0, "initial_deviation": float(np.linalg.norm(u0 - e1))}
    return replace(rep, phases=phases)


def run_cone_control(model, u0_modal, R, cfg=None):
    """Steer u0 to <u0, phi_1> psi_1(t) by running the strip strategy on u0 / <u0, phi_1>."""
    cfg = cfg or ControlConfig()
    u0 = np.asarray(u0_modal, dtype=float)
    if not np.any(u0):
        shifted, lam1 = shift_spectrum(model)
        return RunReport(strategy="cone", mode=cfg.mode, T=1.0, target=cfg.target, lam1=lam1,
                         v0_norm=0.0, converged=True, final_relative_deviation=0.0,
                         final_deviation=0.0, status="converged", scale=0.0,
                         control=PiecewiseControl(()), model=shifted,
                         phases={"gamma": 0.0})
    gamma = float(u0[0])
    perp = float(np.linalg.norm(u0[1:]))
    if gamma == 0.0:
        raise ConeViolated("<u0, phi_1> = 0 with u0 != 0", gamma=gamma)
    if not perp <= R * abs(gamma):
        raise ConeViolated(f"||u0 - <u0,phi_1> phi_1|| = {perp:.6g} exceeds R |<u0, phi_1>| = {R * abs(gamma):.6g}",
                           gamma=gamma)
    try:
        rep = run_strip_control(model, u0 / gamma, R, cfg)
    except StripViolated as exc:
        raise ConeViolated(f"rescaled state fails the strip condition: {exc}", report=exc.report) from exc
    phases = dict(rep.phases, gamma=gamma)
    return replace(rep, strategy="cone", scale=gamma, phases=phases,
                   final_deviation=abs(gamma) * rep.final_deviation)
