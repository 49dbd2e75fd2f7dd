"""Truncated biorthogonal families to real exponentials.

For exponents mu_1 < ... < mu_N and a horizon T the family sigma_k is sought in
span{exp(mu_j (t - T))}; the shifted representation keeps every evaluated
exponential at most 1. Writing G for the Gram matrix of that span, the moment
conditions int_0^T sigma_k(t) exp(mu_j t) dt = delta_kj become
``G c_k = exp(-mu_k T) e_k``, and the solution is the minimal L2-norm function
satisfying them.

Gram matrices of exponentials are Cauchy-like and lose digits quickly, so the
solve climbs a precision ladder (double, then 128- and 256-bit floats from
mpmath) until the moment residual meets its tolerance.
"""

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
import scipy.linalg

from .errors import NotPositiveDefinite, OutOfRange, ResidualTooLarge

DEFAULT_LADDER = (53, 128, 256)
DEFAULT_RESIDUAL_TOL = 1e-8
CONDITION_PREC = 192
DEFAULT_MAX_BITS = 1024


@dataclass(frozen=True)
class PrecisionConfig:
    """Precisions tried in order, then extra rungs sized from the residual
    shortfall until ``max_bits`` (``None``: no extension past the ladder)."""

    ladder: tuple = DEFAULT_LADDER
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    max_bits: int = DEFAULT_MAX_BITS


def _context(prec):
    ctx = mpmath.MPContext()
    ctx.prec = prec
    return ctx


def _mp_gram(ctx, exponents, T):
    n = len(exponents)
    mus = [ctx.mpf(float(m)) for m in exponents]
    T = ctx.mpf(float(T))
    G = ctx.matrix(n, n)
    for i in range(n):
        for j in range(i, n):
            s = mus[i] + mus[j]
            G[i, j] = G[j, i] = T if s == 0 else -ctx.expm1(-s * T) / s
    return G


def _float_gram(exponents, T):
    s = exponents[:, None] + exponents[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        G = -np.expm1(-s * T) / s
    G[s == 0] = T
    return G


def _mp_cholesky(ctx, G):
    try:
        return ctx.cholesky(G)
    except (ValueError, ZeroDivisionError) as exc:
        raise NotPositiveDefinite(f"Cholesky failed at {ctx.prec} bits: {exc}") from exc


def _mp_inverse_from_cholesky(ctx, L):
    n = L.rows
    inv = ctx.matrix(n, n)
    for col in range(n):
        y = [ctx.zero] * n
        for i in range(n):
            acc = ctx.one if i == col else ctx.zero
            for k in range(i):
                acc -= L[i, k] * y[k]
            y[i] = acc / L[i, i]
        x = [ctx.zero] * n
        for i in reversed(range(n)):
            acc = y[i]
            for k in range(i + 1, n):
                acc -= L[k, i] * x[k]
            x[i] = acc / L[i, i]
        for i in range(n):
            inv[i, col] = x[i]
    return inv


def _to_float(mat):
    return np.array([[float(mat[i, j]) for j in range(mat.cols)] for i in range(mat.rows)])


def _check_exponents(exponents, T):
    mu = np.asarray(exponents, dtype=float)
    if mu.ndim != 1 or mu.size == 0:
        raise ValueError("exponents must be a non-empty 1-D sequence")
    if np.any(mu < 0) or np.any(np.diff(mu) <= 0):
        raise ValueError("exponents must be nonnegative and strictly ascending")
    if not T > 0:
        raise ValueError("horizon must be positive")
    return mu


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Gram matrix of exp(mu_j (t - T)) on [0, T], factored at ``precision`` bits."""

    exponents: np.ndarray
    horizon: float
    entries: np.ndarray
    condition: float
    precision: int
    entries_mp: object = field(default=None, repr=False)
    factor: object = field(default=None, repr=False)


def condition_number(exponents, T, prec=CONDITION_PREC):
    """2-norm condition number of the Gram matrix, from extended-precision eigenvalues."""
    ctx = _context(prec)
    ev = ctx.eigsy(_mp_gram(ctx, exponents, T), eigvals_only=True)
    vals = sorted(float(e) for e in ev)
    if vals[0] <= 0:
        return math.inf
    return vals[-1] / vals[0]


def gram_matrix(exponents, T, precision=53):
    """Build and factor the Gram matrix.

    Raises
    ------
    NotPositiveDefinite
        If the Cholesky factorization fails at ``precision`` bits.
    """
    mu = _check_exponents(exponents, T)
    T = float(T)
    entries = _float_gram(mu, T)
    if precision <= 53:
        try:
            factor = scipy.linalg.cho_factor(entries, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"Cholesky failed in double precision: {exc}") from exc
        if not np.all(np.isfinite(factor[0])):
            raise NotPositiveDefinite("Cholesky factor is not finite")
        entries_mp = None
    else:
        ctx = _context(precision)
        entries_mp = _mp_gram(ctx, mu, T)
        factor = _mp_cholesky(ctx, entries_mp)
    cond = condition_number(mu, T, max(CONDITION_PREC, precision))
    return GramMatrix(mu, T, entries, cond, int(precision), entries_mp, factor)


@dataclass(frozen=True, eq=False)
class BiorthogonalBasis:
    """sigma_k(t) = sum_j coefficients[k, j] * exp(mu_j (t - T)), 0 <= t <= T.

    ``coefficients`` is the double-precision copy used for evaluation;
    ``coefficients_mp`` keeps the extended-precision solution (``None`` when
    the solve ran in double precision).
    """

    exponents: np.ndarray
    horizon: float
    coefficients: np.ndarray
    max_residual: float
    precision: int
    gram: GramMatrix = field(repr=False)
    coefficients_mp: object = field(default=None, repr=False)
    gram_inverse_mp: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.exponents.size

    def amplitudes(self, weights):
        """Amplitudes a_j of sum_k weights_k sigma_k = sum_j a_j exp(mu_j (t - T))."""
        w = np.asarray(weights, dtype=float)
        if self.coefficients_mp is None:
            return self.coefficients.T @ w
        ctx = _context(self.precision)
        wm = [ctx.mpf(float(x)) for x in w]
        return np.array([
            float(ctx.fsum(wm[k] * self.coefficients_mp[k, j] for k in range(self.n)))
            for j in range(self.n)
        ])

    def combination_norm(self, weights):
        """L2(0, T) norm of sum_k weights_k sigma_k, from the Gram inverse."""
        w = np.asarray(weights, dtype=float)
        if self.gram_inverse_mp is None:
            E = np.exp(-self.exponents * self.horizon)
            Ginv = scipy.linalg.cho_solve(self.gram.factor, np.eye(self.n))
            ew = E * w
            return math.sqrt(max(float(ew @ Ginv @ ew), 0.0))
        ctx = _context(self.precision)
        T = ctx.mpf(self.horizon)
        ew = [ctx.mpf(float(w[k])) * ctx.exp(-ctx.mpf(float(self.exponents[k])) * T)
              for k in range(self.n)]
        Gi = self.gram_inverse_mp
        sq = ctx.fsum(ew[k] * Gi[k, l] * ew[l] for k in range(self.n) for l in range(self.n))
        return float(ctx.sqrt(max(sq, ctx.zero)))

    def sigma_norm(self, k):
        """L2 norm of sigma_k (1-based)."""
        w = np.zeros(self.n)
        w[k - 1] = 1.0
        return self.combination_norm(w)


def _solve_double(gram):
    mu, T = gram.exponents, gram.horizon
    Ginv = scipy.linalg.cho_solve(gram.factor, np.eye(mu.size))
    C = np.exp(-mu * T)[:, None] * Ginv
    return C


def _solve_mp(gram):
    ctx = _context(gram.precision)
    n = gram.exponents.size
    Ginv = _mp_inverse_from_cholesky(ctx, gram.factor)
    T = ctx.mpf(gram.horizon)
    C = ctx.matrix(n, n)
    for k in range(n):
        ek = ctx.exp(-ctx.mpf(float(gram.exponents[k])) * T)
        for j in range(n):
            C[k, j] = ek * Ginv[k, j]
    return C, Ginv


def _residual_matrix(exponents, T, coeffs, precision, coeffs_mp=None):
    n = exponents.size
    if precision <= 53 and coeffs_mp is None:
        G = _float_gram(exponents, T)
        with np.errstate(over="ignore", invalid="ignore"):
            R = (coeffs @ G) * np.exp(exponents * T)[None, :] - np.eye(n)
        R[~np.isfinite(R)] = math.inf
        return R
    ctx = _context(max(precision, 53))
    G = _mp_gram(ctx, exponents, T)
    C = coeffs_mp
    if C is None:
        C = ctx.matrix([[ctx.mpf(float(x)) for x in row] for row in coeffs])
    Tm = ctx.mpf(float(T))
    scale = [ctx.exp(ctx.mpf(float(m)) * Tm) for m in exponents]
    R = np.empty((n, n))
    for k in range(n):
        for i in range(n):
            acc = ctx.fsum(C[k, j] * G[j, i] for j in range(n)) * scale[i]
            R[k, i] = float(acc - (1 if k == i else 0))
    return R


def moment_residual(basis):
    """Residual matrix int_0^T sigma_k exp(mu_j t) dt - delta_kj and its max norm.

    Evaluated from Gram entries at the basis' precision, without quadrature.
    """
    R = _residual_matrix(basis.exponents, basis.horizon, basis.coefficients,
                         basis.precision, basis.coefficients_mp)
    return R, float(np.max(np.abs(R)))


def biorthogonal_family(exponents, T, precision_cfg=None):
    """Minimal-norm truncated biorthogonal family to exp(mu_j t) on [0, T].

    Raises
    ------
    NotPositiveDefinite
        The Gram matrix could not be factored at any precision of the ladder.
    ResidualTooLarge
        The residual tolerance was not met at the top of the ladder.
    """
    cfg = precision_cfg or PrecisionConfig()
    mu = _check_exponents(exponents, T)
    T = float(T)
    last_error = None
    best = math.inf
    rungs = list(cfg.ladder)
    top = max(rungs)
    i = 0
    while i < len(rungs):
        prec = rungs[i]
        i += 1
        try:
            gram = gram_matrix(mu, T, precision=prec)
        except NotPositiveDefinite as exc:
            last_error = exc
            res = math.inf
        else:
            if prec <= 53:
                C, C_mp, Ginv_mp = _solve_double(gram), None, None
            else:
                C_mp, Ginv_mp = _solve_mp(gram)
                C = _to_float(C_mp)
            R = _residual_matrix(mu, T, C, prec, C_mp)
            res = float(np.max(np.abs(R)))
            best = min(best, res)
            if res <= cfg.residual_tol:
                return BiorthogonalBasis(mu, T, C, res, prec, gram, C_mp, Ginv_mp)
        if i == len(rungs) and cfg.max_bits is not None and top < cfg.max_bits:
            # residual error scales like 2^-prec: add the missing bits plus a margin
            short = math.log2(res / cfg.residual_tol) if math.isfinite(res) else top
            nxt = min(cfg.max_bits, 64 * math.ceil((top + max(short, 0.0) + 32) / 64))
            rungs.append(nxt)
            top = nxt
    if best < math.inf:
        raise ResidualTooLarge(
            f"moment residual {best:.3g} above {cfg.residual_tol:.3g} at {top} bits;"
            " raise max_bits or reduce N"
        )
    raise last_error or NotPositiveDefinite("Gram matrix not factorizable")


def eval_sigma(basis, k, t):
    """Evaluate sigma_k(t), k 1-based, with compensated summation."""
    if not 1 <= k <= basis.n:
        raise OutOfRange(f"k={k} outside 1..{basis.n}")
    T = basis.horizon
    if not (-1e-12 * T <= t <= T * (1 + 1e-12)):
        raise OutOfRange(f"t={t} outside [0, {T}]")
    terms = basis.coefficients[k - 1] * np.exp(basis.exponents * (min(t, T) - T))
    return math.fsum(terms)
