"""Compare the compiled and pure-Python integrator kernels on one control stage.

    python benchmarks/bench_kernels.py [--modes 4 8 12] [--repeat 5]
"""

import argparse
import math
import time

import numpy as np

from groundctl import _kernels, build_model, simulate_bilinear, synthesize_stage_control
from groundctl.simulate import shift_spectrum


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def stage_case(n):
    model = shift_spectrum(build_model("dirichlet-heat", n))[0]
    v = np.zeros(n)
    v[1] = v[2] = 1e-3 / math.sqrt(2)
    T = 1 / math.pi**2
    ctl = synthesize_stage_control(model, v, T)
    return model, v, ctl, T


def run(modes, repeat, tol):
    if _kernels.compiled_backend is None:
        print("compiled kernels not built; only the Python backend is available")
    print(f"{'N':>4} {'backend':>9} {'seconds':>10} {'steps':>7} {'speedup':>8} {'max diff':>10}")
    for n in modes:
        model, v, ctl, T = stage_case(n)
        g = model.ground_coupling
        results = {}
        for name, kern in (("python", _kernels.python_backend), ("compiled", _kernels.compiled_backend)):
            if kern is None:
                continue
            sec, tr = best_of(lambda: simulate_bilinear(model, v, ctl, (0, T), tol=tol, forcing=g,
                                                        backend=kern), repeat)
            results[name] = (sec, tr)
        base = results["python"][0]
        ref = results["python"][1].final
        for name, (sec, tr) in results.items():
            diff = float(np.max(np.abs(tr.final - ref)))
            print(f"{n:>4} {name:>9} {sec:>10.4f} {tr.n_steps:>7d} {base / sec:>8.1f} {diff:>10.2e}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", type=int, nargs="+", default=[4, 8, 12])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args(argv)
    run(args.modes, args.repeat, args.tol)


if __name__ == "__main__":
    main()
