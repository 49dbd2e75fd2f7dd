"""Pure-Python kernels (reference implementation and fallback).

Must stay step-for-step identical to ``_ckernels.pyx``.
"""

import math

import numpy as np

EPS = np.finfo(float).eps
ROUNDOFF = 64.0

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2


def expsum(amps, rates, t_ref, t):
    """Return (sum_j a_j exp(r_j (t - t_ref)), sum_j |a_j exp(r_j (t - t_ref))|).

    Neumaier-compensated.
    """
    s = 0.0
    c = 0.0
    mag = 0.0
    dt = t - t_ref
    for a, r in zip(amps, rates):
        term = a * math.exp(r * dt)
        mag += abs(term)
        tmp = s + term
        if abs(s) >= abs(term):
            c += (s - tmp) + term
        else:
            c += (term - tmp) + s
        s = tmp
    return s + c, mag


def _lawson_rk4(x, t, h, mu, M, g, pfun, ffun=None):
    """One Lawson (integrating-factor) RK4 step for x' = -mu*x - p(t)(M x + g) - f(t).

    Returns the new state and the largest |p| magnitude sum seen.
    """
    E2 = np.exp(-mu * (0.5 * h))
    E = E2 * E2
    p1, m1 = pfun(t)
    p2, m2 = pfun(t + 0.5 * h)
    p4, m4 = pfun(t + h)
    if ffun is None:
        f1 = f2 = f4 = 0.0
    else:
        f1, f2, f4 = ffun(t), ffun(t + 0.5 * h), ffun(t + h)
    k1 = -p1 * (M @ x + g) - f1
    y = E2 * (x + 0.5 * h * k1)
    k2 = -p2 * (M @ y + g) - f2
    y = E2 * x + 0.5 * h * k2
    k3 = -p2 * (M @ y + g) - f2
    y = E * x + h * E2 * k3
    k4 = -p4 * (M @ y + g) - f4
    out = E * x + (h / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)
    return out, max(m1, m2, m4)


def integrate(x0, t0, t1, mu, M, g, amps, rates, t_ref, tol, h, scale_ref,
              max_steps=2_000_000, pfun=None, ffun=None):
    """Adaptive Lawson RK4 with step doubling and local extrapolation.

    Returns ``(x, h_next, n_accepted, n_rejected, sup_norm, max_err, status)``
    where ``max_err`` is the largest accepted error estimate relative to the
    state scale. ``pfun(t) -> (p, |p| magnitude)`` and ``ffun(t) -> vector``
    replace the exponential-sum control and add a free forcing term; only
    this backend accepts them.
    """
    x = np.array(x0, dtype=float)
    mu = np.asarray(mu, dtype=float)
    M = np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float)
    if pfun is None:
        amps = [float(a) for a in amps]
        rates = [float(r) for r in rates]

        def pfun(s):
            return expsum(amps, rates, t_ref, s)
    mnorm = float(np.linalg.norm(M))
    gnorm = float(np.linalg.norm(g))
    t = float(t0)
    t1 = float(t1)
    span = t1 - t
    h = min(float(h), span) if h > 0 else span
    hmin = 1e-15 * max(abs(t1), span, 1e-300)
    xn = float(np.linalg.norm(x))
    sup = xn
    max_err = 0.0
    n_acc = n_rej = 0
    if span <= 0:
        return x, h, 0, 0, sup, 0.0, OK
    while t < t1:
        last = t + h >= t1 - 1e-14 * span
        step = t1 - t if last else h
        full, mag = _lawson_rk4(x, t, step, mu, M, g, pfun, ffun)
        half, mag_a = _lawson_rk4(x, t, 0.5 * step, mu, M, g, pfun, ffun)
        two, mag_b = _lawson_rk4(half, t + 0.5 * step, 0.5 * step, mu, M, g, pfun, ffun)
        diff = two - full
        err = float(np.sqrt(diff @ diff)) / 15.0
        nn = float(np.sqrt(two @ two))
        sc = max(xn, nn, scale_ref)
        pm = max(mag, mag_a, mag_b)
        allowed = tol * sc + ROUNDOFF * EPS * (max(xn, nn) + step * pm * (mnorm * max(xn, nn) + gnorm))
        if not math.isfinite(err):
            err = math.inf
        if err <= allowed:
            x = two + diff / 15.0
            xn = float(np.sqrt(x @ x))
            t = t1 if last else t + step
            n_acc += 1
            sup = max(sup, xn)
            if sc > 0:
                max_err = max(max_err, err / sc)
            fac = 4.0 if err == 0 else min(4.0, max(0.2, 0.9 * (allowed / err) ** 0.2))
            if not last or fac < 1.0:
                h = step * fac
        else:
            n_rej += 1
            fac = 0.1 if not math.isfinite(err) else min(0.9, max(0.1, 0.9 * (allowed / err) ** 0.2))
            h = step * fac
            if h < hmin:
                return x, h, n_acc, n_rej, sup, max_err, STEP_UNDERFLOW
        if n_acc + n_rej >= max_steps:
            return x, h, n_acc, n_rej, sup, max_err, MAX_STEPS
    return x, h, n_acc, n_rej, sup, max_err, OK


def expsum_many(amps, rates, t_ref, ts):
    return np.array([expsum(amps, rates, t_ref, float(t))[0] for t in ts])
