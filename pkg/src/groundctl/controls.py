"""Scalar control signals p(t).

Every control exposes ``value(t)`` and ``pieces(a, b)``. A piece is a tuple
``(lo, hi, amps, rates, t_ref)`` meaning p(t) = sum_j amps[j] exp(rates[j] (t - t_ref))
on [lo, hi]; the integrator consumes pieces directly. Controls that are not
exponential sums (``FunctionControl``) return ``None`` from ``pieces`` and are
integrated by the pure-Python path.
"""

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .moments import _context

_EMPTY = np.zeros(0)


@dataclass(frozen=True, eq=False)
class ExpSumControl:
    """p(t) = sum_j amps[j] exp(rates[j] (t - t_ref)) on [start, end], zero outside."""

    amps: np.ndarray
    rates: np.ndarray
    t_ref: float = 0.0
    start: float = -math.inf
    end: float = math.inf

    def __post_init__(self):
        a = np.array(self.amps, dtype=float).ravel()
        r = np.array(self.rates, dtype=float).ravel()
        if a.shape != r.shape:
            raise ValueError("amps and rates must have the same length")
        a.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "amps", a)
        object.__setattr__(self, "rates", r)

    def value(self, t):
        if not self.start <= t <= self.end:
            return 0.0
        return math.fsum(self.amps * np.exp(self.rates * (t - self.t_ref)))

    __call__ = value

    def pieces(self, a, b):
        lo, hi = max(a, self.start), min(b, self.end)
        out = []
        if a < lo:
            out.append((a, lo, _EMPTY, _EMPTY, 0.0))
        if lo < hi:
            out.append((lo, hi, self.amps, self.rates, self.t_ref))
        if hi < b:
            out.append((max(hi, a), b, _EMPTY, _EMPTY, 0.0))
        return out


def ConstantControl(c, start=-math.inf, end=math.inf):
    return ExpSumControl([float(c)], [0.0], 0.0, start, end)


ZERO = ExpSumControl([], [])


@dataclass(frozen=True, eq=False)
class FunctionControl:
    """Arbitrary callable p(t); simulated by the pure-Python kernel only."""

    fn: object

    def value(self, t):
        return float(self.fn(t))

    __call__ = value

    def pieces(self, a, b):
        return None


def as_control(control):
    if control is None:
        return ZERO
    if isinstance(control, (int, float, np.floating, np.integer)):
        return ConstantControl(float(control))
    if hasattr(control, "pieces") and hasattr(control, "value"):
        return control
    if callable(control):
        return FunctionControl(control)
    raise TypeError(f"cannot interpret {type(control).__name__} as a control")


@dataclass(frozen=True, eq=False)
class StageControl:
    """Moment control of one stage, active on [start, end].

    p(t) = sum_k weights[k] sigma_k(t - start) with weights = deviation / coupling_row
    and sigma_k the biorthogonal family on [0, end - start].
    """

    index: int
    start: float
    end: float
    deviation: np.ndarray
    coupling_row: np.ndarray
    basis: object = field(repr=False)
    weights: np.ndarray = field(init=False)
    amps: np.ndarray = field(init=False, repr=False)
    l2_norm: float = field(init=False)

    def __post_init__(self):
        v = np.array(self.deviation, dtype=float)
        c = np.array(self.coupling_row, dtype=float)
        w = v / c
        for arr in (v, c, w):
            arr.setflags(write=False)
        object.__setattr__(self, "deviation", v)
        object.__setattr__(self, "coupling_row", c)
        object.__setattr__(self, "weights", w)
        if np.any(w):
            a = np.asarray(self.basis.amplitudes(w), dtype=float)
            norm = self.basis.combination_norm(w)
        else:
            a, norm = np.zeros(w.size), 0.0
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)
        object.__setattr__(self, "l2_norm", float(norm))

    @property
    def length(self):
        return self.end - self.start

    @property
    def rates(self):
        return self.basis.exponents

    @property
    def t_ref(self):
        # exp(mu_j (s - T_n)) with s = t - start
        return self.end

    def value(self, t):
        if not self.start <= t <= self.end:
            return 0.0
        return math.fsum(self.amps * np.exp(self.rates * (t - self.end)))

    __call__ = value

    def pieces(self, a, b):
        return ExpSumControl(self.amps, self.rates, self.end, self.start, self.end).pieces(a, b)

    def mp_amplitudes(self):
        """(context, amplitudes) at the basis precision, or ``None`` for double solves."""
        C = self.basis.coefficients_mp
        if C is None:
            return None
        ctx = _context(self.basis.precision)
        n = self.weights.size
        w = [ctx.mpf(float(v)) / ctx.mpf(float(c)) for v, c in zip(self.deviation, self.coupling_row)]
        return ctx, [ctx.fsum(w[k] * C[k, j] for k in range(n)) for j in range(n)]


@dataclass(frozen=True, eq=False)
class PiecewiseControl:
    """Concatenated stage controls with zero extension; right-continuous at breakpoints."""

    stages: tuple = ()

    def __post_init__(self):
        st = tuple(self.stages)
        for a, b in zip(st, st[1:]):
            if a.end != b.start:
                raise ValueError(f"stages {a.index} and {b.index} do not abut")
        object.__setattr__(self, "stages", st)

    @property
    def breakpoints(self):
        if not self.stages:
            return ()
        return (self.stages[0].start,) + tuple(s.end for s in self.stages)

    @property
    def l2_norm(self):
        return math.sqrt(math.fsum(s.l2_norm ** 2 for s in self.stages))

    def stage_at(self, t):
        if not self.stages:
            return None
        bp = self.breakpoints
        if t < bp[0] or t >= bp[-1]:
            return None
        return self.stages[bisect.bisect_right(bp, t) - 1]

    def value(self, t):
        s = self.stage_at(t)
        return 0.0 if s is None else s.value(t)

    __call__ = value

    def pieces(self, a, b):
        out = []
        cur = a
        for s in self.stages:
            if s.end <= cur or s.start >= b:
                continue
            if s.start > cur:
                out.append((cur, s.start, _EMPTY, _EMPTY, 0.0))
                cur = s.start
            hi = min(b, s.end)
            out.append((cur, hi, s.amps, s.rates, s.end))
            cur = hi
        if cur < b:
            out.append((cur, b, _EMPTY, _EMPTY, 0.0))
        return out


def eval_control(control, t):
    """Value of a control at time t (zero past the last breakpoint)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return as_control(control).value(t)
