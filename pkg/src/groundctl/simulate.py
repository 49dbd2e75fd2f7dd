"""Galerkin simulation of the truncated modal dynamics.

State equation, in modal coordinates x_k = <u, phi_k>::

    x_k' = -mu_k x_k - p(t) sum_j coupling[k, j] x_j - f_k(t)

The diagonal is integrated exactly (integrating factor) and the bilinear term
by RK4 with step doubling. ``forcing`` may be a vector g, meaning f = p(t) g,
or a callable f(t).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .controls import PiecewiseControl, StageControl, as_control
from .errors import ToleranceUnreachable
from .moments import _context
from .quadrature import adaptive_gauss

DEFAULT_TOL = 1e-10
DEFAULT_SAMPLES = 32


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled modal states. ``errors[i]`` is the largest accepted local error
    estimate (relative to the state scale) on ``[times[i], times[i+1]]``."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    errors: np.ndarray
    sup_norm: float
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def norms(self):
        return np.linalg.norm(self.states, axis=1)

    @property
    def final(self):
        return self.states[-1].copy()

    def __len__(self):
        return self.times.size


def shift_spectrum(model):
    """Return ``(shifted model, lambda_1)`` with eigenvalues mu_k = lambda_k - lambda_1."""
    lam1 = float(model.eigenvalues[0])
    shifted = replace(model, eigenvalues=model.eigenvalues - lam1, shift=model.shift + lam1)
    return shifted, lam1


def propagate_free(model, state, dt):
    """Exact free decay (p = 0) over dt."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    return np.asarray(state, dtype=float) * np.exp(-model.eigenvalues * dt)


def _sample_grid(a, b, samples):
    if b <= a:
        return np.array([a])
    if samples and samples > 1:
        return np.linspace(a, b, int(samples) + 1)
    return np.array([a, b])


def _initial_step(mu, mnorm, pmag, span, tol):
    rate = max(1.0, 0.1 * float(mu[-1]) if mu.size else 1.0, pmag * mnorm)
    return min(span, tol ** 0.2 / rate)


def simulate_bilinear(model, state0, control, interval, tol=DEFAULT_TOL, forcing=None,
                      samples=0, scale_ref=None, backend=None):
    """Integrate the bilinear modal system over ``interval = (t0, t1)``.

    Raises
    ------
    ToleranceUnreachable
        Step size underflow or step budget exhausted.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t0, t1 = (float(x) for x in interval)
    if t1 < t0:
        raise ValueError("interval must be increasing")
    ctl = as_control(control)
    mu = np.ascontiguousarray(model.eigenvalues, dtype=float)
    M = np.ascontiguousarray(model.b_matrix, dtype=float)
    n = mu.size
    x = np.array(state0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"state has shape {x.shape}, expected ({n},)")

    ffun = None
    if forcing is None:
        g = np.zeros(n)
    elif callable(forcing):
        g = np.zeros(n)
        ffun = lambda t: np.asarray(forcing(t), dtype=float)
    else:
        g = np.ascontiguousarray(forcing, dtype=float)

    pieces = ctl.pieces(t0, t1)
    pfun = None
    kern = backend or _kernels.backend
    if pieces is None:
        pieces = [(t0, t1, None, None, 0.0)]
        pfun = lambda t: (lambda v: (v, abs(v)))(ctl.value(t))
    if pfun is not None or ffun is not None:
        kern = _kernels.python_backend

    grid = _sample_grid(t0, t1, samples)
    ref = float(np.linalg.norm(x)) if scale_ref is None else float(scale_ref)
    mnorm = float(np.linalg.norm(M))
    states = [x.copy()]
    errs = []
    sup = float(np.linalg.norm(x))
    n_acc = n_rej = 0
    h = 0.0
    gi = 1
    seg_err = 0.0
    for lo, hi, amps, rates, t_ref in pieces:
        amps = np.zeros(0) if amps is None else np.ascontiguousarray(amps, dtype=float)
        rates = np.zeros(0) if rates is None else np.ascontiguousarray(rates, dtype=float)
        if h <= 0:
            pm = float(np.sum(np.abs(amps))) if amps.size else 0.0
            h = _initial_step(mu, mnorm, pm, hi - lo, tol)
        cur = lo
        while cur < hi:
            stop = min(hi, grid[gi]) if gi < grid.size else hi
            if stop <= cur:
                gi += 1
                continue
            kwargs = {}
            if kern is _kernels.python_backend:
                kwargs = {"pfun": pfun, "ffun": ffun}
            x, h, na, nr, s, err, status = kern.integrate(
                x, cur, stop, mu, M, g, amps, rates, t_ref, tol, h, ref, **kwargs
            )
            n_acc += na
            n_rej += nr
            sup = max(sup, s)
            seg_err = max(seg_err, err)
            if status != _kernels.OK:
                why = "step size underflow" if status == _kernels.STEP_UNDERFLOW else "step budget exhausted"
                raise ToleranceUnreachable(
                    f"{why} at t={cur:.6g} (tol={tol:g}); tighten the stage or relax tol",
                    t=cur, tol=tol,
                )
            cur = stop
            if gi < grid.size and stop == grid[gi]:
                states.append(x.copy())
                errs.append(seg_err)
                seg_err = 0.0
                gi += 1
    times = grid[: len(states)]
    controls = np.array([ctl.value(float(t)) for t in times])
    return Trajectory(times, np.array(states), controls, np.array(errs), sup, n_acc, n_rej)


def _stage_segments(ctl, a, b):
    """Exponential pieces of ``ctl`` on [a, b], each tagged with its mp amplitudes."""
    if isinstance(ctl, StageControl):
        stages = [ctl]
    elif isinstance(ctl, PiecewiseControl):
        stages = list(ctl.stages)
    else:
        pcs = ctl.pieces(a, b)
        if pcs is None:
            return None
        return [pc + (None,) for pc in pcs]
    out = []
    cur = a
    for s in stages:
        lo, hi = max(cur, s.start), min(b, s.end)
        if hi <= lo:
            continue
        if lo > cur:
            out.append((cur, lo, np.zeros(0), np.zeros(0), 0.0, None))
        out.append((lo, hi, s.amps, s.rates, s.end, s.mp_amplitudes()))
        cur = hi
    if cur < b:
        out.append((cur, b, np.zeros(0), np.zeros(0), 0.0, None))
    return out


def _duhamel_float(mu, c, x, lo, hi, amps, rates, t_ref):
    L = hi - lo
    out = x * np.exp(-mu * L)
    for a, r in zip(amps, rates):
        s = mu + r
        with np.errstate(divide="ignore", invalid="ignore"):
            prim = np.where(s == 0, L, -np.expm1(-s * L) / np.where(s == 0, 1.0, s))
        out = out - c * a * math.exp(r * (hi - t_ref)) * prim
    return out


def _duhamel_mp(ctx, mu, c, x, lo, hi, amps, rates, t_ref):
    L = ctx.mpf(hi) - ctx.mpf(lo)
    off = ctx.mpf(hi) - ctx.mpf(t_ref)
    out = []
    for k in range(len(mu)):
        muk = ctx.mpf(float(mu[k]))
        acc = []
        for a, r in zip(amps, rates):
            r = ctx.mpf(float(r))
            s = muk + r
            prim = L if s == 0 else -ctx.expm1(-s * L) / s
            acc.append(a * ctx.exp(r * off) * prim)
        out.append(x[k] * ctx.exp(-muk * L) - ctx.mpf(float(c[k])) * ctx.fsum(acc))
    return out


def simulate_linearized(model, v0, control, interval, samples=0, quad_tol=1e-12):
    """Solve v' = -mu v - p(t) B phi_1 by Duhamel's formula.

    Exponential-sum controls use the closed-form convolution (at the moment
    basis precision for stage controls); other controls use adaptive
    quadrature.
    """
    a, b = (float(x) for x in interval)
    ctl = as_control(control)
    mu = np.asarray(model.eigenvalues, dtype=float)
    c = np.asarray(model.ground_coupling, dtype=float)
    x = np.array(v0, dtype=float)
    grid = _sample_grid(a, b, samples)
    segs = _stage_segments(ctl, a, b)

    states = [x.copy()]
    if segs is None:
        for lo, hi in zip(grid[:-1], grid[1:]):
            conv = np.array([
                adaptive_gauss(lambda s, m=m: np.exp(-m * (hi - s)) * np.array([ctl.value(float(t)) for t in np.atleast_1d(s)]),
                               lo, hi, tol=quad_tol)
                for m in mu
            ])
            x = x * np.exp(-mu * (hi - lo)) - c * conv
            states.append(x.copy())
    else:
        prec = max([seg[5][0].prec for seg in segs if seg[5] is not None] or [53])
        ctx = _context(prec) if prec > 53 else None
        xm = [ctx.mpf(float(v)) for v in x] if ctx is not None else None
        gi = 1
        for lo, hi, amps, rates, t_ref, mp in segs:
            cur = lo
            while cur < hi:
                stop = min(hi, grid[gi]) if gi < grid.size else hi
                if stop <= cur:
                    gi += 1
                    continue
                if ctx is not None:
                    am = [ctx.convert(v) for v in mp[1]] if mp is not None else [ctx.mpf(float(v)) for v in amps]
                    xm = _duhamel_mp(ctx, mu, c, xm, cur, stop, am, rates, t_ref)
                    x = np.array([float(v) for v in xm])
                else:
                    x = _duhamel_float(mu, c, x, cur, stop, amps, rates, t_ref)
                cur = stop
                if gi < grid.size and stop == grid[gi]:
                    states.append(x.copy())
                    gi += 1
    times = grid[: len(states)]
    states = np.array(states)
    controls = np.array([ctl.value(float(t)) for t in times])
    sup = float(np.max(np.linalg.norm(states, axis=1)))
    return Trajectory(times, states, controls, np.zeros(max(len(times) - 1, 0)), sup)
