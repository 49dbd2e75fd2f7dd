"""Run bookkeeping shared by the synthesis, verification and CLI layers."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class StageRecord:
    n: int
    length: float
    start: float
    end: float
    norm_start: float
    norm_end: float
    control_norm: float
    gate: float
    residual: float
    precision: int
    sup_norm: float
    lambda_T: float
    c_alpha: float
    log_K: float
    linearized_end: float
    n_steps: int
    induction_bound: float = math.nan

    @property
    def exponent(self):
        """log ||v(tau_n)|| / log ||v(tau_{n-1})||, when both norms are in (0, 1)."""
        a, b = self.norm_start, self.norm_end
        if 0 < a < 1 and 0 < b:
            return math.log(b) / math.log(a)
        return math.nan

    def to_dict(self):
        d = asdict(self)
        d["exponent"] = self.exponent
        return d


@dataclass(frozen=True, eq=False)
class RunReport:
    """Outcome of a local, strip or cone run.

    Norms are deviations v = z - phi_1 of the shifted state z = e^{lambda_1 t} u,
    which equal relative deviations of u from the target trajectory.
    """

    strategy: str
    mode: str
    T: float
    target: float
    lam1: float
    v0_norm: float
    stages: tuple = ()
    converged: bool = False
    final_time: float = 0.0
    final_relative_deviation: float = math.nan
    final_deviation: float = math.nan
    status: str = "ok"
    error: str = None
    c_b: float = 1.0
    constants: object = field(default=None, repr=False)
    schedule: object = field(default=None, repr=False)
    control: object = field(default=None, repr=False)
    trajectory: object = field(default=None, repr=False)
    model: object = field(default=None, repr=False)
    start_time: float = 0.0
    scale: float = 1.0
    phases: dict = field(default_factory=dict)

    @property
    def norm_sequence(self):
        return [self.v0_norm] + [s.norm_end for s in self.stages]

    @property
    def total_control_norm(self):
        return math.sqrt(math.fsum(s.control_norm ** 2 for s in self.stages))

    @property
    def n_stages(self):
        return len(self.stages)

    def with_stages(self, stages):
        from dataclasses import replace

        return replace(self, stages=tuple(stages))

    def to_dict(self):
        out = {
            "strategy": self.strategy,
            "mode": self.mode,
            "T": self.T,
            "target": self.target,
            "lambda_1": self.lam1,
            "v0_norm": self.v0_norm,
            "converged": self.converged,
            "final_time": self.final_time,
            "final_relative_deviation": self.final_relative_deviation,
            "final_deviation": self.final_deviation,
            "total_control_norm": self.total_control_norm,
            "n_stages": self.n_stages,
            "status": self.status,
            "error": self.error,
            "scale": self.scale,
            "start_time": self.start_time,
            "c_b": self.c_b,
            "phases": dict(self.phases),
        }
        if self.schedule is not None:
            out["schedule"] = self.schedule.to_dict()
        return out


def u_samples(report):
    """(times, p, ||u - target||, u) from a run's stored v-trajectory."""
    tr = report.trajectory
    if tr is None or len(tr) == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, 0))
    t = tr.times
    decay = np.exp(-report.lam1 * t)
    ground = np.zeros(tr.states.shape[1])
    ground[0] = 1.0
    u = report.scale * decay[:, None] * (tr.states + ground)
    dev = abs(report.scale) * decay * np.linalg.norm(tr.states, axis=1)
    return t, tr.controls, dev, u
