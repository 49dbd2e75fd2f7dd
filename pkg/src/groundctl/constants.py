"""Theoretical constants of the local controllability argument.

Everything is evaluated in log space; the constants overflow double precision
for small T long before they become meaningless. Series over the spectrum are
summed over the N available modes and the remainder k > N is bounded
analytically (see :func:`series_tail`).
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln, logsumexp

LOG_MAX = math.log(np.finfo(float).max)


def _exp(x):
    return math.inf if x > LOG_MAX else math.exp(x)


@dataclass(frozen=True)
class ConstantsConfig:
    c_bar: float = 1.0
    c_k: float = None
    c_m: float = None
    grid: tuple = (1e-3, 1.0, 61)
    k_margin: float = 1.05


@dataclass(frozen=True)
class StageSchedule:
    T: float
    alpha: float
    T_alpha: float
    T_f: float
    T_tilde: float
    lengths: tuple
    breakpoints: tuple
    j_max: int

    def length(self, j):
        return self.T_tilde / j**2

    def to_dict(self):
        return asdict(self)


def stage_schedule(T, alpha, j_max=12):
    """Stage lengths T_j = T~/j^2 with T~ = 6 T_f / pi^2 and breakpoints tau_n."""
    if not (T > 0 and alpha > 0) or j_max < 1:
        raise ValueError("need T > 0, alpha > 0, j_max >= 1")
    T_alpha = math.pi**2 / 6 * min(1.0, 1.0 / alpha**2)
    T_f = min(T, T_alpha)
    T_tilde = 6.0 * T_f / math.pi**2
    lengths = tuple(T_tilde / j**2 for j in range(1, j_max + 1))
    taus = [0.0]
    for L in lengths:
        taus.append(taus[-1] + L)
    return StageSchedule(float(T), float(alpha), T_alpha, T_f, T_tilde, lengths, tuple(taus), int(j_max))


# -- series with analytic remainder -----------------------------------------

def series_tail(model, T, m):
    """log of an upper bound for sum_{k>N} exp(-2 mu_k T + m sqrt(mu_k)) / c_k^2.

    Uses 1/c_k^2 <= lambda_k^{2q} / b^2 (original spectrum lambda = mu + shift)
    and sqrt(mu_{k+1}) - sqrt(mu_k) >= alpha for k >= N. The majorant
    f(s) = (s^2 + shift)^{2q} exp(-2 T s^2 + m s) / b^2 is log-concave for
    s^2 >= shift, and for a unimodal f sampled at points spaced at least alpha
    apart the sum is at most 2 max f + (1/alpha) int f. Returns ``inf`` when
    the certificate does not apply.
    """
    q, b, alpha = model.dispersion_q, model.dispersion_b, model.gap_alpha
    shift = max(model.shift, 0.0)
    s0 = math.sqrt(max(model.eigenvalues[-1], 0.0)) + alpha
    if s0 * s0 < shift or b <= 0:
        return math.inf

    def logf(s):
        return 2 * q * math.log(s * s + shift) - 2 * T * s * s + m * s - 2 * math.log(b)

    def dlogf(s):
        return 4 * q * s / (s * s + shift) - 4 * T * s + m

    if dlogf(s0) <= 0:
        s_star = s0
    else:
        hi = s0
        while dlogf(hi) > 0:
            hi *= 2
        s_star = optimize.brentq(dlogf, s0, hi, xtol=1e-14, rtol=1e-14)
    lmax = logf(s_star)
    g = lambda s: math.exp(logf(s) - lmax)
    # the peak has width ~ 1/sqrt(T); split there so quad sees it
    knot = s_star + 40.0 * max(1.0 / math.sqrt(T), 1.0)
    val = 0.0
    for lo, hi in ((s0, s_star), (s_star, knot), (knot, math.inf)):
        if hi > lo:
            val += integrate.quad(g, lo, hi, limit=200, epsabs=0.0, epsrel=1e-10)[0]
    # slack for the quadrature error on a smooth positive integrand
    return lmax + math.log(2.0 + 1.001 * val / alpha)


def log_spectral_sum(model, T, m):
    """(log of the N-term sum, log of the tail bound) for
    sum_k exp(-2 mu_k T + m sqrt(mu_k)) / c_k^2."""
    mu = np.asarray(model.eigenvalues, dtype=float)
    c = np.abs(np.asarray(model.ground_coupling, dtype=float))
    terms = -2.0 * mu * T + m * np.sqrt(np.maximum(mu, 0.0)) - 2.0 * np.log(c)
    return float(logsumexp(terms)), series_tail(model, T, m)


def _log_total(head, tail):
    return head if tail == -math.inf else float(np.logaddexp(head, tail))


def log_lambda_sq(model, T, c_bar=1.0):
    head, tail = log_spectral_sum(model, T, c_bar / model.gap_alpha)
    return _log_total(head, tail), head, tail


def lambda_T(model, T, c_bar=1.0):
    """Lambda_T over the spectrum of ``model`` and the bound on its k > N remainder.

    Returns ``(Lambda_T including the tail bound, N-term value, tail bound of Lambda_T^2)``.
    """
    total, head, tail = log_lambda_sq(model, T, c_bar)
    return _exp(0.5 * total), _exp(0.5 * head), _exp(tail)


def log_c_alpha_sq(T, alpha, c_bar=1.0):
    if T <= 1.0 / alpha**2:
        return math.log(c_bar) + math.log(1.0 / T + 1.0 / (T * T * alpha * alpha)) + c_bar / (T * alpha * alpha)
    return 2.0 * math.log(c_bar * alpha)


def c_alpha(T, alpha, c_bar=1.0):
    return _exp(0.5 * log_c_alpha_sq(T, alpha, c_bar))


def log_k_sq(model, T, c_bar=1.0, log_lam_sq=None):
    """log K(T)^2 with K^2 = C_B^2 e^{2 C_B sqrt T + (C_B+1) T} C_a^2 L^2 (1 + C_B C_a^2 L^2)."""
    cb = model.operator_norm_b
    lls = log_lambda_sq(model, T, c_bar)[0] if log_lam_sq is None else log_lam_sq
    lca = log_c_alpha_sq(T, model.gap_alpha, c_bar)
    x = lca + lls
    return 2 * math.log(cb) + 2 * cb * math.sqrt(T) + (cb + 1) * T + x + float(np.logaddexp(0.0, math.log(cb) + x))


def log_k_sq_kt(model, T, c_bar=1.0):
    """Same quantity written as C_B e^{...} C_4 L^2 (1 + C_4 L^2) with C_4 = C_B C_a^2."""
    cb = model.operator_norm_b
    lls = log_lambda_sq(model, T, c_bar)[0]
    l4 = math.log(cb) + log_c_alpha_sq(T, model.gap_alpha, c_bar)
    return math.log(cb) + 2 * cb * math.sqrt(T) + (cb + 1) * T + l4 + lls + float(np.logaddexp(0.0, l4 + lls))


def gm_exponent(model, c_bar=1.0):
    return c_bar * (1.0 + 1.0 / model.gap_alpha**2)


def log_g_m(model, T, c_bar=1.0):
    """log G_M(T) with M = c_bar (1 + 1/alpha^2), tail included."""
    M = gm_exponent(model, c_bar)
    head, tail = log_spectral_sum(model, T, M)
    return math.log(M) - 2 * math.log(T) + M / T + _log_total(head, tail)


def _log_grid(grid):
    lo, hi, n = grid
    return np.geomspace(lo, hi, int(n))


def _calibrate(fn, grid):
    """max over T in [lo, hi] of T*fn(T): grid scan plus bounded refinement
    around every local grid maximum."""
    Ts = _log_grid(grid)
    vals = np.array([T * fn(T) for T in Ts])
    best_val, best_T = float(np.max(vals)), float(Ts[int(np.argmax(vals))])
    for i in range(Ts.size):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i + 1 < Ts.size else -np.inf
        if vals[i] >= left and vals[i] >= right:
            a = math.log(Ts[max(i - 1, 0)])
            b = math.log(Ts[min(i + 1, Ts.size - 1)])
            if b > a:
                res = optimize.minimize_scalar(
                    lambda lt: -math.exp(lt) * fn(math.exp(lt)), bounds=(a, b),
                    method="bounded", options={"xatol": 1e-12},
                )
                if -res.fun > best_val:
                    best_val, best_T = float(-res.fun), float(math.exp(res.x))
    return best_val, best_T


def calibrate_c_m(model, c_bar=1.0, grid=(1e-3, 1.0, 61)):
    """C_M = max_T T log G_M(T) on a log grid; returns ``(C_M, argmax T)``."""
    return _calibrate(lambda T: log_g_m(model, T, c_bar), grid)


def calibrate_k_exponent(model, c_bar=1.0, grid=(1e-3, 1.0, 61)):
    """max_T T log K(T) on a log grid; returns ``(value, argmax T)``."""
    return _calibrate(lambda T: 0.5 * log_k_sq(model, T, c_bar), grid)


def gm_envelope(model, q=None):
    """Constants (C_q, C_{alpha,q}) of the bound
    sum_k lambda_k^{2q} e^{-lambda_k T} <= C_q / T^{2q} + C_{alpha,q} / T^{1+2q}.

    Two terms can sit next to the peak of lambda^{2q} e^{-lambda T}; the rest is
    bounded by the integral divided by the minimal spacing
    lambda_{k+1} - lambda_k >= alpha (sqrt(lambda_2) + sqrt(lambda_1)).
    """
    q = model.dispersion_q if q is None else q
    lam = model.eigenvalues
    c_q = 2.0 * (2 * q) ** (2 * q) * math.exp(-2 * q)
    spacing = model.gap_alpha * (math.sqrt(lam[1]) + math.sqrt(max(lam[0], 0.0)))
    c_aq = 2.0 * math.exp(gammaln(2 * q + 1)) / spacing
    return c_q, c_aq


@dataclass(frozen=True)
class ConstantsReport:
    T: float
    c_bar: float
    c_k: float
    c_m: float
    c_m_argmax: float
    k_exponent: float
    c_b: float
    alpha: float
    lambda_T: float
    lambda_T_head: float
    lambda_tail_sq: float
    c_alpha: float
    c3: float
    c4: float
    log_K: float
    K: float
    log_K_kt: float
    M: float
    log_G_M: float
    G_M: float
    T_f: float
    R_T: float
    log_R_T: float
    gate_factor: float
    p_bound_sq: float
    schedule: StageSchedule = field(repr=False)

    def to_dict(self):
        d = asdict(self)
        d["schedule"] = self.schedule.to_dict()
        return d


def p_bound_sq(c_k, T_f):
    """e^{-pi^2 C_K / T_f} / (e^{2 pi^2 C_K / (3 T_f)} - 1)."""
    a = math.pi**2 * c_k / T_f
    return _exp(-a - math.log(math.expm1(2 * a / 3)) if 2 * a / 3 < LOG_MAX else -math.inf)


def theoretical_constants(model, T, cfg=None):
    """All constants at horizon T for ``model`` (pass the shifted model for runs)."""
    cfg = cfg or ConstantsConfig()
    cb = cfg.c_bar
    c_m, t_m = (cfg.c_m, math.nan) if cfg.c_m is not None else calibrate_c_m(model, cb, cfg.grid)
    k_exp, _ = calibrate_k_exponent(model, cb, cfg.grid)
    c_k = cfg.c_k if cfg.c_k is not None else cfg.k_margin * max(c_m, k_exp)
    total, head, tail = log_lambda_sq(model, T, cb)
    lam = _exp(0.5 * total)
    lca2 = log_c_alpha_sq(T, model.gap_alpha, cb)
    ca = _exp(0.5 * lca2)
    cbn = model.operator_norm_b
    lk2 = log_k_sq(model, T, cb, total)
    sched = stage_schedule(T, model.gap_alpha)
    log_r = -math.pi**2 * c_k / sched.T_f
    lg = log_g_m(model, T, cb) if T <= 1.0 else math.nan
    return ConstantsReport(
        T=float(T), c_bar=cb, c_k=float(c_k), c_m=float(c_m), c_m_argmax=float(t_m),
        k_exponent=float(k_exp), c_b=cbn, alpha=model.gap_alpha,
        lambda_T=lam, lambda_T_head=_exp(0.5 * head), lambda_tail_sq=_exp(tail),
        c_alpha=ca, c3=2 * math.sqrt(T) * cbn * ca, c4=cbn * _exp(lca2),
        log_K=0.5 * lk2, K=_exp(0.5 * lk2), log_K_kt=0.5 * log_k_sq_kt(model, T, cb),
        M=gm_exponent(model, cb), log_G_M=lg, G_M=_exp(lg) if lg == lg else math.nan,
        T_f=sched.T_f, R_T=_exp(log_r), log_R_T=log_r,
        gate_factor=_exp(0.5 * (lca2 + total)),
        p_bound_sq=p_bound_sq(c_k, sched.T_f), schedule=sched,
    )
