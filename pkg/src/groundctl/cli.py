"""Command line entry point: ``groundctl <command> --config cfg.json [--out DIR] [--seed N]``.

Exit codes: 0 success, 2 configuration error, 3 control failure, 4 numerical failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import io
from .constants import c_alpha, lambda_T, stage_schedule, theoretical_constants
from .errors import ConfigError, ControlFailure, DegenerateSequence, NumericalFailure
from .report import u_samples
from .simulate import shift_spectrum
from .spectral import verify_spectral_hypotheses
from .synthesis import run_cone_control, run_local_control, run_strip_control
from .verification import fit_run, verify_gm_bound, verify_run, verify_series_identities

EXIT_OK, EXIT_CONFIG, EXIT_CONTROL, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("groundctl")


def _doc(cfg, status, constants=None, stages=(), checks=(), final=None):
    return {
        "config_echo": cfg.raw if cfg is not None else None,
        "constants": constants or {},
        "stages": list(stages),
        "checks": list(checks),
        "final": final or {},
        "status": status,
    }


def _run_doc(cfg, report):
    checks = verify_run(report)
    final = report.to_dict()
    final["estimates_ok"] = checks.ok
    try:
        final["contraction_fit"] = fit_run(report).to_dict()
    except DegenerateSequence as exc:
        final["contraction_fit"] = {"error": str(exc)}
    consts = report.constants.to_dict() if report.constants is not None else {}
    return _doc(cfg, report.status, consts, [s.to_dict() for s in report.stages],
                checks.to_list(), final)


def _trajectory(report):
    t, p, dev, u = u_samples(report)
    if len(t) == 0:
        return None
    return t, p, dev, u


def _need_model(cfg):
    if not cfg.model:
        raise ConfigError("this command needs a model section")
    return io.model_from_config(cfg)


def cmd_run(cfg, command, seed):
    model = _need_model(cfg)
    u0 = io.initial_state(cfg, model.n_modes)
    ccfg = cfg.control_config(seed)
    if command == "local":
        report = run_local_control(model, u0, cfg.T, ccfg)
    else:
        if cfg.R is None:
            raise ConfigError(f"{command} needs control.R")
        runner = run_strip_control if command == "strip" else run_cone_control
        report = runner(model, u0, cfg.R, ccfg)
    code = EXIT_OK if report.converged else EXIT_CONTROL
    return code, _run_doc(cfg, report), _trajectory(report), model.n_modes


def cmd_constants(cfg, seed):
    model = _need_model(cfg)
    ccfg = cfg.control_config(seed)
    shifted, lam1 = shift_spectrum(model)
    T = cfg.T
    consts = theoretical_constants(shifted, T, ccfg.constants_config())
    lam, head, tail_sq = lambda_T(model, T, ccfg.c_bar)
    gm = verify_gm_bound(shifted, ccfg.constants_config())
    final = {
        "lambda_1": lam1,
        "unshifted": {"lambda_T": lam, "lambda_T_head": head, "lambda_tail_sq": tail_sq,
                      "c_alpha": c_alpha(T, model.gap_alpha, ccfg.c_bar)},
        "schedule": stage_schedule(T, model.gap_alpha, ccfg.j_max).to_dict(),
        "gm_bound": gm.to_dict(),
    }
    checks = [{"name": "gm-bound", "holds": gm.holds, "max_excess": gm.max_fine_ratio},
              {"name": "gm-envelope", "holds": gm.envelope_holds, "max_ratio": gm.envelope_max_ratio}]
    status = "ok" if gm.holds else "failed"
    return EXIT_OK, _doc(cfg, status, consts.to_dict(), (), checks, final), None, model.n_modes


def cmd_hypotheses(cfg, seed):
    model = _need_model(cfg)
    rep = verify_spectral_hypotheses(model)
    checks = [{"name": k, "holds": bool(getattr(rep, k))}
              for k in ("ascending", "gap_ok", "symmetric", "ground_row_nonzero", "dispersion_ok")]
    final = dict(rep.to_dict(), model=model.to_dict())
    return EXIT_OK, _doc(cfg, "ok" if rep.ok else "failed", None, (), checks, final), None, model.n_modes


def cmd_identities(cfg, seed):
    n_max = int((cfg.raw.get("verify") or {}).get("n_max", 30))
    rows = verify_series_identities(n_max)
    checks = [{"name": "series", "n": r.n, "lhs": r.lhs, "rhs": r.rhs, "exact": r.exact,
               "remainder": float(r.remainder), "remainder_bound": float(r.remainder_bound),
               "holds": r.exact and r.within_bound} for r in rows]
    ok = all(c["holds"] for c in checks)
    final = {"n_max": n_max, "partial_sum": rows[-1].lhs, "distance_to_6": float(rows[-1].remainder)}
    n = (cfg.model or {}).get("n_modes", 0) if cfg.model.get("kind") != "custom" else 0
    return EXIT_OK, _doc(cfg, "ok" if ok else "failed", None, (), checks, final), None, int(n or 0)


def build_parser():
    p = argparse.ArgumentParser(prog="groundctl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in io.COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "verify-identities", help="scenario JSON")
        s.add_argument("--out", help="output directory (overrides output.directory)")
        s.add_argument("--seed", type=int, help="seed for r1 probe directions")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def run_scenario(command, config_path=None, out=None, seed=None):
    """Run one command; return (exit code, written paths)."""
    try:
        if config_path is None:
            cfg = io.parse_config({"schema": io.SCHEMA})
        else:
            cfg = io.load_config(config_path)
    except ConfigError as exc:
        print(f"groundctl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, []
    out_dir = out if out is not None else cfg.out_dir
    n_modes = int(cfg.model.get("n_modes", 0) or 0)
    handlers = {"constants": cmd_constants, "hypotheses": cmd_hypotheses,
                "verify-identities": cmd_identities}
    try:
        if command in ("local", "strip", "cone"):
            code, doc, traj, n_modes = cmd_run(cfg, command, seed)
        else:
            code, doc, traj, n_modes = handlers[command](cfg, seed)
    except ConfigError as exc:
        print(f"groundctl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, []
    except ControlFailure as exc:
        print(f"groundctl: {type(exc).__name__}: {exc}", file=sys.stderr)
        if exc.report is not None:
            doc = _run_doc(cfg, exc.report)
            traj = _trajectory(exc.report)
            n_modes = exc.report.model.n_modes if exc.report.model is not None else n_modes
        else:
            doc, traj = _doc(cfg, "control-failure"), None
        doc["status"] = "control-failure"
        doc["final"]["error"] = type(exc).__name__
        doc["final"]["message"] = str(exc)
        doc["final"]["details"] = dict(exc.details)
        code = EXIT_CONTROL
    except NumericalFailure as exc:
        print(f"groundctl: {type(exc).__name__}: {exc}", file=sys.stderr)
        doc = _doc(cfg, "numerical-failure",
                   final={"error": type(exc).__name__, "message": str(exc), "details": dict(exc.details)})
        traj, code = None, EXIT_NUMERICAL
    paths = io.export_artifacts(doc, traj, out_dir, n_modes, cfg.formats)
    return code, paths


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    code, paths = run_scenario(args.command, args.config, args.out, args.seed)
    for p in paths:
        print(p)
    return code


if __name__ == "__main__":
    sys.exit(main())
