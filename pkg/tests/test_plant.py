import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wsanctl.errors import ConfigurationError
from wsanctl.plant import (
    DIVERGENCE_THRESHOLD,
    DisturbanceProfile,
    PlantModel,
    PlantState,
    Setpoint,
    check_setpoint,
    equilibrium_for_input,
    measure,
    nearest_equilibrium,
    setpoint_residual,
    step,
)

from conftest import CASE_A, CASE_B, CASE_B_ROUNDED, CASE_C, CASE_UBAR, CASE_XBAR

finite = st.floats(-10, 10, allow_nan=False)


def test_step_zero_is_equilibrium(case_model):
    s = step(case_model, PlantState(np.zeros(5)), [0.0])
    assert np.array_equal(s.x, np.zeros(5))
    assert s.t == 1


def test_step_setpoint_is_fixed_point(case_model, case_setpoint):
    s = step(case_model, PlantState(case_setpoint.x_bar), case_setpoint.u_bar)
    assert np.allclose(s.x, case_setpoint.x_bar, atol=1e-14)


def test_step_scalar_hand_arithmetic():
    m = PlantModel([[0.5]], [[1.0]], [[1.0]])
    assert step(m, PlantState([2.0]), [1.0]).x[0] == 2.0


def test_step_dimension_mismatch(case_model):
    with pytest.raises(ConfigurationError):
        step(case_model, PlantState(np.zeros(5)), [0.0, 1.0])
    with pytest.raises(ConfigurationError):
        step(case_model, PlantState(np.zeros(4)), [0.0])


def test_step_flags_divergence():
    m = PlantModel([[2.0]], [[1.0]], [[1.0]])
    s = PlantState([DIVERGENCE_THRESHOLD * 0.6])
    s = step(m, s, [0.0])
    assert s.diverged


@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite), finite, finite)
def test_step_superposition(x1, x2, u1, u2):
    m = PlantModel(CASE_A, CASE_B, CASE_C)
    lhs = step(m, PlantState(x1 + x2), [u1 + u2]).x
    rhs = step(m, PlantState(x1), [u1]).x + step(m, PlantState(x2), [u2]).x
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_measure_examples(case_model):
    d = DisturbanceProfile(0.5, (70.0, 120.0))
    assert measure(case_model, PlantState(np.zeros(5)), d, 10.0)[0] == 0.0
    assert measure(case_model, PlantState(np.zeros(5)), d, 80.0)[0] == 0.5
    assert measure(case_model, PlantState([0, 1, 2, 0, 0]), None, 0.0)[0] == 3.0


def test_disturbance_interval_validation():
    with pytest.raises(ConfigurationError):
        DisturbanceProfile(0.5, (10.0, 5.0))


def test_reference_eigenvalues():
    eig = np.sort(np.linalg.eigvals(CASE_A).real)
    assert np.allclose(eig, np.sort([0.413, 0.563, 0.624, 1.068, 1.006]), atol=1e-2)


def test_rank_checks():
    with pytest.raises(ConfigurationError):
        PlantModel(np.eye(2), [[1.0], [1.0]], [[1.0, 0.0]])
    with pytest.raises(ConfigurationError):
        PlantModel(np.diag([0.5, 0.7]), [[1.0], [1.0]], [[1.0, 0.0]])


def test_setpoint_residual_examples(case_model):
    assert setpoint_residual(case_model, Setpoint(np.zeros(5), [0.0])) == 0.0
    rng = np.random.default_rng(3)
    assert setpoint_residual(case_model, Setpoint(rng.normal(size=5), [0.0])) > 0


def test_reference_setpoint_residual_matches_direct_evaluation(case_model, caplog):
    # direct oracle, written out element by element
    r = [
        sum((CASE_A[i, j] - (i == j)) * CASE_XBAR[j] for j in range(5)) + CASE_B[i, 0] * CASE_UBAR
        for i in range(5)
    ]
    oracle = float(np.sqrt(sum(v * v for v in r)))
    sp = Setpoint(CASE_XBAR, [CASE_UBAR])
    assert setpoint_residual(case_model, sp) == pytest.approx(oracle, rel=1e-12)
    assert oracle < 1e-2
    with caplog.at_level(logging.WARNING):
        check_setpoint(case_model, Setpoint(CASE_XBAR, [1.0]))
    assert "not an exact equilibrium" in caplog.text


def test_nearest_equilibrium_is_exact_and_close(case_model):
    sp = nearest_equilibrium(case_model, CASE_XBAR)
    assert setpoint_residual(case_model, sp) < 1e-12
    assert np.abs(sp.x_bar - CASE_XBAR).max() < 1e-2
    x = equilibrium_for_input(case_model, [0.2])
    assert setpoint_residual(case_model, Setpoint(x, [0.2])) < 1e-12


def test_rounded_input_vector_is_close_to_fractions():
    assert np.abs(CASE_B - CASE_B_ROUNDED).max() < 5e-4


def test_substep_model_reproduces_control_rate(case_model):
    fast = case_model.substep_model(20)
    rng = np.random.default_rng(0)
    x, u = rng.normal(size=5), rng.normal(size=1)
    s = PlantState(x)
    for _ in range(20):
        s = step(fast, s, u)
    assert np.allclose(s.x, case_model.A @ x + case_model.B @ u, atol=1e-10)
    assert s.t == 20


@settings(max_examples=30)
@given(arrays(float, 5, elements=finite))
def test_substeps_hold_setpoint(offset):
    m = PlantModel(CASE_A, CASE_B, CASE_C)
    sp = nearest_equilibrium(m, CASE_XBAR + 0.0 * offset)
    fast = m.substep_model(20)
    s = PlantState(sp.x_bar)
    for _ in range(20):
        s = step(fast, s, sp.u_bar)
        assert np.abs(s.x - sp.x_bar).max() < 1e-12
