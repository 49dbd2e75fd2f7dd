import json
import math

import numpy as np
import pytest

from groundctl import ControlConfig, build_model, run_local_control
from groundctl.simulate import shift_spectrum


@pytest.fixture(scope="session")
def dirichlet8():
    return build_model("dirichlet-heat", 8)


@pytest.fixture(scope="session")
def shifted8(dirichlet8):
    return shift_spectrum(dirichlet8)[0]


@pytest.fixture(scope="session")
def local_run(dirichlet8):
    """The reference local run: u0 = phi_1 + 1e-3 (e_2 + e_3) / sqrt(2), T = 1."""
    u0 = np.zeros(8)
    u0[0] = 1.0
    u0[1] = u0[2] = 1e-3 / math.sqrt(2.0)
    return run_local_control(dirichlet8, u0, 1.0, ControlConfig(j_max=8))


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return p

    return _write


def identity_model(mu):
    from groundctl.spectral import custom_model_from_dict

    n = len(mu)
    return custom_model_from_dict({"eigenvalues": list(mu), "coupling": np.eye(n).tolist(),
                                   "alpha": 0.5, "q": 1.0, "b": 1e-3, "label": "identity"},
                                  validate=False)


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, text): acceptance criterion n")


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None or (report.when != "call" and report.passed):
        return
    n, text = marker
    ok = _ACCEPTANCE.get(n, (text, True))[1] and report.passed
    _ACCEPTANCE[n] = (text, ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        outcome.get_result().acceptance = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        text, ok = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")
