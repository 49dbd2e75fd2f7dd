"""Checks of the stage estimates against recorded runs, decay fits and series identities.

An inequality lhs <= rhs is reported with ``slack = rhs / lhs`` (infinite when
lhs = 0) and holds when lhs <= (1 + REL_TOL) rhs. Checks are asserted only in
theory mode; in empirical mode they are informative.
"""

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .constants import (ConstantsConfig, _log_grid, calibrate_c_m, gm_envelope,
                        log_g_m, p_bound_sq)
from .errors import DegenerateSequence

REL_TOL = 0.01
NORM_FLOOR = 1e-14
SUPEREXP_SLOPE = 0.5 * math.log(2.0)


def _log(x):
    return math.log(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class EstimateCheck:
    name: str
    stage: int
    lhs: float
    rhs: float
    log_slack: float
    holds: bool
    asserted: bool

    @property
    def slack(self):
        if self.log_slack == math.inf:
            return math.inf
        return math.exp(min(self.log_slack, 709.0))

    def to_dict(self):
        d = asdict(self)
        d["slack"] = self.slack
        return d


def _check(name, stage, log_lhs, log_rhs, asserted):
    log_slack = math.inf if log_lhs == -math.inf else log_rhs - log_lhs
    holds = log_slack >= -math.log1p(REL_TOL)
    lhs = math.exp(log_lhs) if log_lhs < 709 else math.inf
    rhs = math.exp(log_rhs) if log_rhs < 709 else math.inf
    return EstimateCheck(name, stage, lhs, rhs, log_slack, bool(holds), asserted)


@dataclass(frozen=True)
class EstimateChecks:
    mode: str
    checks: tuple

    @property
    def failures(self):
        return [c for c in self.checks if not c.holds]

    @property
    def asserted_failures(self):
        return [c for c in self.checks if c.asserted and not c.holds]

    @property
    def ok(self):
        return not self.asserted_failures

    @property
    def all_hold(self):
        return not self.failures

    def named(self, name):
        return [c for c in self.checks if c.name == name]

    def to_list(self):
        return [c.to_dict() for c in self.checks]


def verify_run(report, constants=None):
    """Per-stage checks of pbound, unifv, wT, estimvn, the gate, and the total
    control norm against pestimate."""
    consts = constants if constants is not None else report.constants
    theory = report.mode == "theory"
    cb = report.c_b
    out = []
    log_prod = 0.0  # log of prod_j K(T_j)^{2^{n-j}} ||v0||^{2^n}, built recursively
    log_v0 = _log(report.v0_norm)
    wt_all = True
    for i, s in enumerate(report.stages):
        n = s.n
        lv = _log(s.norm_start)
        out.append(_check("gate", n, _log(s.gate), 0.0, True))
        out.append(_check("pbound", n, _log(s.control_norm),
                          _log(s.c_alpha) + _log(s.lambda_T) + lv, theory))
        c3 = 2.0 * math.sqrt(s.length) * cb * s.c_alpha
        c4 = cb * s.c_alpha ** 2
        log_rhs = (c3 * s.lambda_T * s.norm_start + cb * s.length + math.log1p(c4 * s.lambda_T ** 2)
                   + 2 * lv)
        out.append(_check("unifv", n, 2 * _log(s.sup_norm), log_rhs, theory))
        wt = _check("wT", n, _log(s.norm_end), s.log_K + 2 * lv, theory)
        wt_all = wt_all and wt.log_slack >= 0
        out.append(wt)
        log_prod = s.log_K + 2 * (log_v0 if i == 0 else log_prod)
        out.append(_check("estimvn", n, _log(s.norm_end), log_prod, theory))
        if wt_all:
            # the product bound follows from exact per-stage bounds
            out.append(_check("estimvn-consistency", n, _log(s.norm_end), log_prod, True))
    if consts is not None and report.stages:
        total_sq = report.total_control_norm ** 2
        out.append(_check("pestimate", 0, _log(total_sq), _log(p_bound_sq(consts.c_k, consts.T_f)), theory))
    return EstimateChecks(report.mode, tuple(out))


# -- contraction fits --------------------------------------------------------

@dataclass(frozen=True)
class ContractionFit:
    exponents: tuple
    slope: float
    superexponential: bool
    loglog_exponent: float
    n_points: int
    floor_reached: bool = False

    def to_dict(self):
        return asdict(self)


def contraction_exponents(norms):
    """Per-step exponents log v_n / log v_{n-1}, slope of log(-log v_n) against n,
    and the log-log regression exponent of v_n against v_{n-1}.

    Raises
    ------
    DegenerateSequence
        Zero ("reached exact floor"), non-finite or too short sequences.
    """
    v = np.asarray(norms, dtype=float)
    if v.size < 3:
        raise DegenerateSequence("need at least three norms")
    if not np.all(np.isfinite(v)):
        raise DegenerateSequence("non-finite norm in sequence")
    if np.any(v == 0):
        raise DegenerateSequence("reached exact floor (zero norm)", floor=True)
    if np.any(v < 0):
        raise DegenerateSequence("negative norm in sequence")
    lv = np.log(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = tuple(float(x) for x in lv[1:] / lv[:-1])
    if np.all(v < 1):
        n = np.arange(v.size, dtype=float)
        slope = float(np.polyfit(n, np.log(-lv), 1)[0])
    else:
        slope = math.nan
    x, y = lv[:-1], lv[1:]
    if np.ptp(x) > 0:
        loglog = float(np.polyfit(x, y, 1)[0])
    else:
        loglog = math.nan
    return ContractionFit(expo, slope, bool(slope >= SUPEREXP_SLOPE), loglog, int(v.size))


def fit_run(report, first=1, last=6, floor_rel=NORM_FLOOR):
    """Contraction fit over ||v(tau_first)||..||v(tau_last)||, dropping norms
    below floor_rel * ||v0|| (double-precision floor)."""
    seq = report.norm_sequence[first:last + 1]
    floor = floor_rel * report.v0_norm
    kept = [x for x in seq if x >= floor]
    fit = contraction_exponents(kept)
    if len(kept) < len(seq):
        fit = ContractionFit(fit.exponents, fit.slope, fit.superexponential, fit.loglog_exponent,
                             fit.n_points, True)
    return fit


# -- series identities -------------------------------------------------------

@dataclass(frozen=True)
class SeriesCheck:
    n: int
    lhs: Fraction
    rhs: Fraction
    exact: bool
    remainder: Fraction
    remainder_bound: Fraction
    within_bound: bool


def verify_series_identities(n_max=30):
    """sum_{j=0}^n j^2 / 2^j = 2^{-n} (-n^2 - 4n + 6 (2^n - 1)) in exact rationals,
    and 6 - partial sum <= (n^2 + 4n + 6) / 2^n."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    out = []
    acc = Fraction(0)
    for n in range(n_max + 1):
        acc += Fraction(n * n, 2 ** n)
        rhs = Fraction(-n * n - 4 * n + 6 * (2 ** n - 1), 2 ** n)
        rem = 6 - acc
        bound = Fraction(n * n + 4 * n + 6, 2 ** n)
        out.append(SeriesCheck(n, acc, rhs, acc == rhs, rem, bound, 0 <= rem <= bound))
    return out


# -- G_M bound ---------------------------------------------------------------

@dataclass(frozen=True)
class GMBoundCheck:
    c_m: float
    argmax_T: float
    grid: tuple
    fine_grid_points: int
    max_fine_ratio: float  # max over the fine grid of T log G_M(T) - C_M
    holds: bool
    envelope_c_q: float
    envelope_c_aq: float
    envelope_max_ratio: float
    envelope_holds: bool

    def to_dict(self):
        return asdict(self)


def verify_gm_bound(model, cfg=None, grid=(1e-2, 1.0, 41), refine=10):
    """Calibrate C_M on ``grid`` and check G_M(T) <= e^{C_M/T} on a grid
    ``refine`` times finer; also compare sum_k lambda_k^{2q} e^{-lambda_k T} with
    the envelope C_q / T^{2q} + C_{alpha,q} / T^{1+2q}."""
    cfg = cfg or ConstantsConfig()
    c_m, t_star = calibrate_c_m(model, cfg.c_bar, grid)
    lo, hi, n = grid
    fine = _log_grid((lo, hi, (int(n) - 1) * refine + 1))
    worst = max(T * log_g_m(model, T, cfg.c_bar) - c_m for T in fine)
    c_q, c_aq = gm_envelope(model)
    q = model.dispersion_q
    lam = model.eigenvalues
    ratios = []
    for T in fine:
        s = float(np.sum(lam ** (2 * q) * np.exp(-lam * T)))
        env = c_q / T ** (2 * q) + c_aq / T ** (1 + 2 * q)
        ratios.append(s / env)
    worst_env = float(max(ratios))
    tol = 1e-12 * max(1.0, abs(c_m))
    return GMBoundCheck(c_m, t_star, tuple(grid), len(fine), float(worst), bool(worst <= tol),
                        c_q, c_aq, worst_env, bool(worst_env <= 1.0))
