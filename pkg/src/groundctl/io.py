"""Scenario configuration and artifact files."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .moments import PrecisionConfig
from .spectral import KINDS, QuadratureConfig, build_model, load_custom_spectral
from .synthesis import MODES, ControlConfig

SCHEMA = 1
COMMANDS = ("local", "strip", "cone", "constants", "hypotheses", "verify-identities")
FORMATS = ("json", "csv")


@dataclass(frozen=True)
class ScenarioConfig:
    raw: dict
    model: dict
    initial: object
    control: dict
    simulator: dict
    output: dict
    base_dir: Path = field(default=Path("."))

    def control_config(self, seed=None):
        c, s = self.control, self.simulator
        ladder = tuple(c.get("precision_ladder", PrecisionConfig().ladder))
        return ControlConfig(
            mode=c.get("mode", "empirical"),
            target=float(c.get("target", 1e-12)),
            j_max=int(c.get("j_max", 12)),
            c_bar=float(c.get("c_bar", 1.0)),
            c_k=_opt_float(c.get("c_k")),
            c_m=_opt_float(c.get("c_m")),
            tol=float(s.get("tol", 1e-10)),
            samples=int(s.get("samples", 32)),
            precision=PrecisionConfig(ladder, float(c.get("residual_tol", 1e-8)),
                                      c.get("max_precision_bits", PrecisionConfig().max_bits)),
            r1=_opt_float(c.get("r1")),
            seed=int(seed if seed is not None else c.get("seed", 0)),
        )

    @property
    def T(self):
        return float(self.control.get("T", 1.0))

    @property
    def R(self):
        return _opt_float(self.control.get("R"))

    @property
    def out_dir(self):
        return Path(self.output.get("directory", "."))

    @property
    def formats(self):
        return tuple(self.output.get("formats", FORMATS))


def _opt_float(x):
    return None if x is None else float(x)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _positive(section, key, name):
    if key in section and section[key] is not None:
        v = section[key]
        _require(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0,
                 f"{name}.{key} must be a positive number, got {v!r}")


def parse_config(doc, base_dir=Path(".")):
    """Validate a config document; raise :class:`ConfigError` on the first problem."""
    _require(isinstance(doc, dict), "config must be a JSON object")
    _require(doc.get("schema") == SCHEMA, f"unsupported schema {doc.get('schema')!r} (expected {SCHEMA})")
    model = doc.get("model", {})
    _require(isinstance(model, dict), "model section must be an object")
    control = doc.get("control", {}) or {}
    sim = doc.get("simulator", {}) or {}
    out = doc.get("output", {}) or {}
    for sec, name in ((control, "control"), (sim, "simulator"), (out, "output")):
        _require(isinstance(sec, dict), f"{name} section must be an object")
    if model:
        kind = model.get("kind")
        _require(kind in KINDS, f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}")
        if kind == "custom":
            path = model.get("path")
            _require(isinstance(path, str), "custom model needs model.path")
            _require((base_dir / path).is_file(), f"custom spectral file {path!r} not found")
        else:
            n = model.get("n_modes")
            _require(isinstance(n, int) and not isinstance(n, bool) and n >= 2,
                     f"model.n_modes must be an integer >= 2, got {n!r}")
    for key in ("T", "c_bar", "c_k", "c_m", "r1", "R", "residual_tol"):
        _positive(control, key, "control")
    if "target" in control:
        t = control["target"]
        _require(isinstance(t, (int, float)) and t >= 0, "control.target must be >= 0")
    if "j_max" in control:
        _require(isinstance(control["j_max"], int) and control["j_max"] >= 1, "control.j_max must be an integer >= 1")
    lad = control.get("precision_ladder", [53])
    _require(isinstance(lad, list) and lad and all(isinstance(b, int) and b >= 53 for b in lad),
             "control.precision_ladder must be a non-empty list of integers >= 53")
    mb = control.get("max_precision_bits", 53)
    _require(mb is None or (isinstance(mb, int) and mb >= 53),
             "control.max_precision_bits must be an integer >= 53 or null")
    _require(control.get("mode", "empirical") in MODES, f"control.mode must be one of {MODES}")
    _positive(sim, "tol", "simulator")
    if "samples" in sim:
        _require(isinstance(sim["samples"], int) and sim["samples"] >= 0, "simulator.samples must be an integer >= 0")
    fm = out.get("formats", FORMATS)
    _require(isinstance(fm, list) or isinstance(fm, tuple), "output.formats must be a list")
    _require(all(f in FORMATS for f in fm), f"output.formats entries must be in {FORMATS}")
    return ScenarioConfig(doc, model, (doc.get("initial") or {}).get("u0"), control, sim, out, base_dir)


def load_config(path):
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, p.parent)


def model_from_config(cfg):
    m = cfg.model
    if m["kind"] == "custom":
        return load_custom_spectral(cfg.base_dir / m["path"])
    q = m.get("quadrature", {})
    qc = QuadratureConfig(int(q.get("nodes", 20)), float(q.get("tol", 1e-12)))
    return build_model(m["kind"], m["n_modes"], qc, mu=m.get("mu"), dispersion_b=m.get("b"))


def initial_state(cfg, n_modes):
    """u0 as a dense list or as a sparse {mode (1-based): value} map."""
    u0 = cfg.initial
    _require(u0 is not None, "initial.u0 is required for this command")
    if isinstance(u0, dict):
        x = np.zeros(n_modes)
        for k, v in u0.items():
            try:
                i = int(k)
            except ValueError:
                raise ConfigError(f"initial.u0 key {k!r} is not a mode index") from None
            _require(1 <= i <= n_modes, f"initial.u0 mode {i} outside 1..{n_modes}")
            x[i - 1] = float(v)
        return x
    _require(isinstance(u0, list) and len(u0) == n_modes,
             f"initial.u0 must list {n_modes} modal coefficients")
    x = np.asarray(u0, dtype=float)
    _require(bool(np.all(np.isfinite(x))), "initial.u0 has non-finite entries")
    return x


# -- artifacts ---------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, float):
        if math.isfinite(obj):
            return obj
        return "nan" if obj != obj else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    if hasattr(obj, "numerator") and hasattr(obj, "denominator") and not isinstance(obj, int):
        return f"{obj.numerator}/{obj.denominator}"
    return obj


def dumps(doc):
    """Deterministic JSON: shortest round-trip floats, non-finite values as strings."""
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def write_report(doc, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(dumps(doc))
    return path


def write_trajectory(out_dir, times, p, dev, states, n_modes):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectory.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "p", "norm_dev"] + [f"x_{k}" for k in range(1, n_modes + 1)])
        for i in range(len(times)):
            row = [times[i], p[i], dev[i]] + list(states[i])
            w.writerow([format(float(x), ".17g") for x in row])
    return path


def export_artifacts(doc, trajectory, out_dir, n_modes, formats=FORMATS):
    """Write report.json and trajectory.csv; ``trajectory`` is (t, p, dev, states) or None."""
    paths = []
    if "json" in formats:
        paths.append(write_report(doc, out_dir))
    if "csv" in formats:
        if trajectory is None:
            trajectory = ([], [], [], np.zeros((0, n_modes)))
        paths.append(write_trajectory(out_dir, *trajectory, n_modes))
    return paths
