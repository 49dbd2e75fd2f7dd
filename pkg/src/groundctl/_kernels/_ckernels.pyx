# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; step-for-step twin of ``_pykernels.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt, isfinite, INFINITY, pow

cnp.import_array()

cdef double EPS = np.finfo(float).eps
cdef double ROUNDOFF = 64.0

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2


cdef inline double _expsum(const double[::1] amps, const double[::1] rates,
                           double t_ref, double t, double* mag) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0, c = 0.0, m = 0.0, term, tmp
    cdef double dt = t - t_ref
    for j in range(amps.shape[0]):
        term = amps[j] * exp(rates[j] * dt)
        m += fabs(term)
        tmp = s + term
        if fabs(s) >= fabs(term):
            c += (s - tmp) + term
        else:
            c += (term - tmp) + s
        s = tmp
    mag[0] = m
    return s + c


def expsum(const double[::1] amps, const double[::1] rates, double t_ref, double t):
    cdef double mag
    cdef double v = _expsum(amps, rates, t_ref, t, &mag)
    return v, mag


def expsum_many(const double[::1] amps, const double[::1] rates, double t_ref, const double[::1] ts):
    cdef Py_ssize_t i, n = ts.shape[0]
    cdef double mag
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _expsum(amps, rates, t_ref, ts[i], &mag)
    return out


cdef inline void _force(const double[:, ::1] M, const double[::1] g, double p,
                        const double* y, double* k, Py_ssize_t n) noexcept nogil:
    # k = -p (M y + g)
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = g[i]
        for j in range(n):
            acc += M[i, j] * y[j]
        k[i] = -p * acc


cdef double _lawson_rk4(const double* x, double t, double h,
                        const double[::1] mu, const double[:, ::1] M, const double[::1] g,
                        const double[::1] amps, const double[::1] rates, double t_ref,
                        double* out, double* work, Py_ssize_t n) noexcept nogil:
    cdef double* E2 = work
    cdef double* E = work + n
    cdef double* k1 = work + 2 * n
    cdef double* k2 = work + 3 * n
    cdef double* k3 = work + 4 * n
    cdef double* k4 = work + 5 * n
    cdef double* y = work + 6 * n
    cdef Py_ssize_t i
    cdef double m1, m2, m4, p1, p2, p4
    for i in range(n):
        E2[i] = exp(-mu[i] * (0.5 * h))
        E[i] = E2[i] * E2[i]
    p1 = _expsum(amps, rates, t_ref, t, &m1)
    p2 = _expsum(amps, rates, t_ref, t + 0.5 * h, &m2)
    p4 = _expsum(amps, rates, t_ref, t + h, &m4)
    _force(M, g, p1, x, k1, n)
    for i in range(n):
        y[i] = E2[i] * (x[i] + 0.5 * h * k1[i])
    _force(M, g, p2, y, k2, n)
    for i in range(n):
        y[i] = E2[i] * x[i] + 0.5 * h * k2[i]
    _force(M, g, p2, y, k3, n)
    for i in range(n):
        y[i] = E[i] * x[i] + h * E2[i] * k3[i]
    _force(M, g, p4, y, k4, n)
    for i in range(n):
        out[i] = E[i] * x[i] + (h / 6.0) * (E[i] * k1[i] + 2.0 * E2[i] * (k2[i] + k3[i]) + k4[i])
    if m2 > m1:
        m1 = m2
    if m4 > m1:
        m1 = m4
    return m1


cdef inline double _norm(const double* v, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += v[i] * v[i]
    return sqrt(s)


def integrate(x0, double t0, double t1, mu, M, g, amps, rates, double t_ref,
              double tol, double h, double scale_ref, long max_steps=2_000_000):
    cdef const double[::1] mu_v = np.ascontiguousarray(mu, dtype=float)
    cdef const double[:, ::1] M_v = np.ascontiguousarray(M, dtype=float)
    cdef const double[::1] g_v = np.ascontiguousarray(g, dtype=float)
    cdef const double[::1] a_v = np.ascontiguousarray(amps, dtype=float)
    cdef const double[::1] r_v = np.ascontiguousarray(rates, dtype=float)
    cdef Py_ssize_t n = mu_v.shape[0], i
    x_arr = np.array(x0, dtype=float)
    cdef double[::1] x = x_arr
    buf = np.empty(10 * n)
    cdef double[::1] b = buf
    cdef double* full = &b[0] if n > 0 else NULL
    cdef double* half = full + n
    cdef double* two = full + 2 * n
    wbuf = np.empty(7 * n)
    cdef double[::1] w = wbuf
    cdef double* work = &w[0] if n > 0 else NULL
    cdef double mnorm = float(np.linalg.norm(M_v))
    cdef double gnorm = float(np.linalg.norm(g_v))
    cdef double t = t0, span = t1 - t0, step, err, nn, xn, sc, pm, mag, mag_a, mag_b
    cdef double allowed, fac, d, sup, max_err = 0.0
    cdef double hmin = 1e-15 * max(fabs(t1), span, 1e-300)
    cdef long n_acc = 0, n_rej = 0
    cdef bint last
    cdef int status = 0
    if span <= 0 or n == 0:
        return x_arr, h, 0, 0, float(np.linalg.norm(x_arr)), 0.0, OK
    h = min(h, span) if h > 0 else span
    xn = _norm(&x[0], n)
    sup = xn
    with nogil:
        while t < t1:
            last = t + h >= t1 - 1e-14 * span
            step = t1 - t if last else h
            mag = _lawson_rk4(&x[0], t, step, mu_v, M_v, g_v, a_v, r_v, t_ref, full, work, n)
            mag_a = _lawson_rk4(&x[0], t, 0.5 * step, mu_v, M_v, g_v, a_v, r_v, t_ref, half, work, n)
            mag_b = _lawson_rk4(half, t + 0.5 * step, 0.5 * step, mu_v, M_v, g_v, a_v, r_v, t_ref,
                                two, work, n)
            err = 0.0
            for i in range(n):
                d = two[i] - full[i]
                err += d * d
            err = sqrt(err) / 15.0
            nn = _norm(two, n)
            sc = xn
            if nn > sc:
                sc = nn
            if scale_ref > sc:
                sc = scale_ref
            pm = mag
            if mag_a > pm:
                pm = mag_a
            if mag_b > pm:
                pm = mag_b
            d = xn if xn > nn else nn
            allowed = tol * sc + ROUNDOFF * EPS * (d + step * pm * (mnorm * d + gnorm))
            if not isfinite(err):
                err = INFINITY
            if err <= allowed:
                for i in range(n):
                    x[i] = two[i] + (two[i] - full[i]) / 15.0
                xn = _norm(&x[0], n)
                t = t1 if last else t + step
                n_acc += 1
                if xn > sup:
                    sup = xn
                if sc > 0 and err / sc > max_err:
                    max_err = err / sc
                if err == 0:
                    fac = 4.0
                else:
                    fac = 0.9 * pow(allowed / err, 0.2)
                    fac = 4.0 if fac > 4.0 else (0.2 if fac < 0.2 else fac)
                if not last or fac < 1.0:
                    h = step * fac
            else:
                n_rej += 1
                if not isfinite(err):
                    fac = 0.1
                else:
                    fac = 0.9 * pow(allowed / err, 0.2)
                    fac = 0.9 if fac > 0.9 else (0.1 if fac < 0.1 else fac)
                h = step * fac
                if h < hmin:
                    status = 1
                    break
            if n_acc + n_rej >= max_steps:
                status = 2
                break
    return x_arr, h, n_acc, n_rej, sup, max_err, status
