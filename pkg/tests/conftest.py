import numpy as np
import pytest

from wsanctl.config import load_config, preset_path
from wsanctl.mpc import MpcConfig, Polytope
from wsanctl.plant import PlantModel, nearest_equilibrium

CASE_A = np.array([
    [0.717, -1.367, -0.218, -0.867, -0.899],
    [0.078, 0.209, -0.105, -0.511, -0.466],
    [0.122, 0.891, 1.305, 0.511, 0.666],
    [-0.243, -1.383, -0.610, -0.023, -0.932],
    [0.122, 0.871, 0.165, 0.712, 1.466],
])
CASE_B = np.array([1 / 12, 1 / 18, -1 / 18, 1 / 9, -1 / 18]).reshape(-1, 1)
CASE_B_ROUNDED = np.array([0.083, 0.056, -0.056, 0.111, -0.056]).reshape(-1, 1)
CASE_C = np.array([[0.0, 1.0, 1.0, 0.0, 0.0]])
CASE_Q = np.diag([1.0, 1.0, 1.0, 5.0, 1.0])
CASE_R = np.array([[0.08]])
CASE_XBAR = np.array([0.289, 1.735, 0.578, -1.157, -1.735])
CASE_UBAR = 0.2


@pytest.fixture(scope="session")
def case_model():
    return PlantModel(CASE_A, CASE_B, CASE_C)


@pytest.fixture(scope="session")
def case_setpoint(case_model):
    return nearest_equilibrium(case_model, CASE_XBAR)


@pytest.fixture(scope="session")
def case_mpc(case_setpoint):
    ub = case_setpoint.u_bar
    U = Polytope.box(-40 - ub, 40 - ub)
    return MpcConfig(CASE_A, CASE_B, CASE_Q, CASE_R, 50, 1.1, U=U)


@pytest.fixture
def interference_cfg():
    return load_config(preset_path("interference"))


@pytest.fixture
def short_cfg():
    cfg = load_config(preset_path("interference"))
    cfg.duration_sec = 10.0
    return cfg


def pytest_configure(config):
    config._acceptance_lines = {}


@pytest.fixture
def verdict(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._acceptance_lines[number] = line
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
