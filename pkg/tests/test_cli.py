import csv
import json
import math

import numpy as np
import pytest

from fractions import Fraction

from groundctl import io, run_local_control
from groundctl.cli import main, run_scenario
from groundctl.errors import ConfigError

LOCAL = {
    "schema": 1,
    "model": {"kind": "dirichlet-heat", "n_modes": 8},
    "initial": {"u0": {"1": 1.0, "2": 1e-3 / math.sqrt(2), "3": 1e-3 / math.sqrt(2)}},
    "control": {"T": 1.0, "mode": "empirical", "target": 1e-12, "j_max": 8},
    "simulator": {"tol": 1e-10, "samples": 8},
}


def with_(doc, **sections):
    out = json.loads(json.dumps(doc))
    for k, v in sections.items():
        out[k] = dict(out.get(k, {}), **v) if isinstance(v, dict) else v
    return out


def run(write_json, tmp_path, doc, command="local", name="cfg.json", out="out"):
    cfg = write_json(name, doc)
    outdir = tmp_path / out
    code = main([command, "--config", str(cfg), "--out", str(outdir)])
    return code, outdir


def test_local_happy_path(write_json, tmp_path):
    code, out = run(write_json, tmp_path, LOCAL)
    cfg = io.load_config(tmp_path / "cfg.json")
    model = io.model_from_config(cfg)
    local_run = run_local_control(model, io.initial_state(cfg, 8), cfg.T, cfg.control_config())
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert set(rep) == {"config_echo", "constants", "stages", "checks", "final", "status"}
    assert rep["status"] == "converged"
    assert len(rep["stages"]) == rep["final"]["n_stages"] == local_run.n_stages
    # round trip: norms reproduce the in-process run exactly
    assert [s["norm_end"] for s in rep["stages"]] == [s.norm_end for s in local_run.stages]
    assert rep["config_echo"] == LOCAL
    with (out / "trajectory.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "p", "norm_dev"] + [f"x_{k}" for k in range(1, 9)]
    assert len(rows) == 1 + 1 + 8 * local_run.n_stages
    assert float(rows[1][2]) == pytest.approx(1e-3, rel=1e-15)


def test_byte_identical_reruns(write_json, tmp_path):
    _, a = run(write_json, tmp_path, LOCAL, out="a")
    _, b = run(write_json, tmp_path, LOCAL, out="b")
    for name in ("report.json", "trajectory.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_unknown_kind_no_artifacts(write_json, tmp_path):
    code, out = run(write_json, tmp_path, with_(LOCAL, model={"kind": "wave"}))
    assert code == 2
    assert not out.exists()


@pytest.mark.parametrize("bad", [
    {"schema": 2},
    {"control": {"T": -1.0}},
    {"control": {"mode": "fast"}},
    {"simulator": {"samples": -3}},
    {"model": {"kind": "dirichlet-heat", "n_modes": 1}},
    {"model": {"kind": "custom", "path": "missing.json"}},
    {"initial": {"u0": [1.0, 0.0]}},
    {"initial": {"u0": {"9": 1.0}}},
    {"output": {"formats": ["xml"]}},
    {"control": {"precision_ladder": [32]}},
])
def test_config_errors_exit_2(write_json, tmp_path, bad):
    code, out = run(write_json, tmp_path, with_(LOCAL, **bad))
    assert code == 2
    assert not out.exists()


def test_invalid_json_exit_2(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["local", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_theory_mode_outside_R_T(write_json, tmp_path):
    doc = with_(LOCAL, control={"mode": "theory", "c_k": 1.0})
    code, out = run(write_json, tmp_path, doc)
    assert code == 3
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "control-failure"
    assert rep["final"]["error"] == "AdmissibilityViolated"
    assert rep["final"]["details"]["R_T"] == pytest.approx(math.exp(-6 * math.pi**2), rel=1e-12)
    assert (out / "trajectory.csv").exists()


def test_not_converged_exit_3(write_json, tmp_path):
    code, out = run(write_json, tmp_path, with_(LOCAL, control={"j_max": 1}))
    assert code == 3
    assert json.loads((out / "report.json").read_text())["status"] == "not-converged"


def test_numerical_failure_exit_4(write_json, tmp_path):
    doc = with_(LOCAL, model={"kind": "dirichlet-heat", "n_modes": 16},
                initial={"u0": {"1": 1.0, "2": 1e-3}}, control={"precision_ladder": [53], "max_precision_bits": None})
    code, out = run(write_json, tmp_path, doc)
    assert code == 4
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "numerical-failure"
    assert rep["final"]["error"] in ("ResidualTooLarge", "NotPositiveDefinite")


def test_strip_and_cone(write_json, tmp_path):
    strip = with_(LOCAL, initial={"u0": {"1": 1.0, "2": 9e-3}}, control={"R": 10 * 2**-10, "r1": 2**-10})
    code, out = run(write_json, tmp_path, strip, "strip", out="s")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["final"]["phases"]["t_R"] == pytest.approx(math.log(100) / (6 * math.pi**2), abs=1e-12)
    cone = with_(LOCAL, initial={"u0": {"1": 2.0, "2": 0.1}}, control={"R": 1.0, "r1": 2**-10})
    code, out = run(write_json, tmp_path, cone, "cone", out="c")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["final"]["scale"] == 2.0 and rep["final"]["final_relative_deviation"] <= 1e-12


def test_strip_needs_R(write_json, tmp_path):
    code, out = run(write_json, tmp_path, LOCAL, "strip")
    assert code == 2 and not out.exists()


def test_seed_flag_reaches_calibration(write_json, tmp_path, monkeypatch):
    seen = {}
    import groundctl.synthesis as syn

    def fake(model, cfg=None, seed=None, max_power=20):
        seen["seed"] = cfg.seed
        return 2.0**-10

    monkeypatch.setattr(syn, "calibrate_r1", fake)
    cfg = write_json("s.json", with_(LOCAL, initial={"u0": {"1": 1.0, "2": 9e-3}}, control={"R": 0.01}))
    assert main(["strip", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "7"]) == 0
    assert seen["seed"] == 7


@pytest.mark.parametrize("command", ["constants", "hypotheses", "verify-identities"])
def test_report_commands(write_json, tmp_path, command):
    code, out = run(write_json, tmp_path, LOCAL, command)
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "ok"
    assert all(c["holds"] for c in rep["checks"])
    if command == "constants":
        assert rep["constants"]["T_f"] == pytest.approx(1 / 6)
        assert rep["final"]["unshifted"]["c_alpha"] == pytest.approx(math.pi)


def test_verify_identities_without_config(tmp_path):
    code, paths = run_scenario("verify-identities", None, tmp_path / "o")
    assert code == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    exact = sum(Fraction(j * j, 2**j) for j in range(31))
    assert rep["final"]["partial_sum"] == f"{exact.numerator}/{exact.denominator}"
    assert (tmp_path / "o" / "trajectory.csv").read_text() == "t,p,norm_dev\n"


def test_custom_model_hypotheses(write_json, tmp_path):
    write_json("modes.json", {"eigenvalues": [0, 1, 4], "coupling": [[1, .5, .2], [.5, 1, .1], [.2, .1, 1]],
                             "alpha": 1.0, "q": 1.0, "b": 0.1})
    doc = {"schema": 1, "model": {"kind": "custom", "path": "modes.json"}}
    code, out = run(write_json, tmp_path, doc, "hypotheses")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["final"]["model"]["n_modes"] == 3


# -- io helpers ----------------------------------------------------------------

def test_empty_trajectory_header_only(tmp_path):
    io.export_artifacts({"status": "ok"}, None, tmp_path, 3)
    assert (tmp_path / "trajectory.csv").read_text() == "t,p,norm_dev,x_1,x_2,x_3\n"


def test_json_non_finite_and_precision():
    x = 0.1 + 0.2
    doc = json.loads(io.dumps({"a": math.inf, "b": -math.inf, "c": math.nan, "d": x, "e": np.float64(x),
                               "f": np.arange(2), "g": np.bool_(True)}))
    assert doc == {"a": "inf", "b": "-inf", "c": "nan", "d": x, "e": x, "f": [0, 1], "g": True}


def test_csv_seventeen_digits(tmp_path):
    x = 1 / 3
    io.write_trajectory(tmp_path, [0.0], [x], [x], np.array([[x]]), 1)
    row = (tmp_path / "trajectory.csv").read_text().splitlines()[1].split(",")
    assert float(row[1]) == x and row[1] == format(x, ".17g")


def test_dense_and_sparse_u0():
    cfg = io.parse_config({"schema": 1, "initial": {"u0": [1, 2, 3]}})
    np.testing.assert_array_equal(io.initial_state(cfg, 3), [1, 2, 3])
    cfg = io.parse_config({"schema": 1, "initial": {"u0": {"2": 5}}})
    np.testing.assert_array_equal(io.initial_state(cfg, 3), [0, 5, 0])
    with pytest.raises(ConfigError):
        io.initial_state(io.parse_config({"schema": 1}), 3)
    with pytest.raises(ConfigError):
        io.initial_state(io.parse_config({"schema": 1, "initial": {"u0": {"x": 1}}}), 3)
