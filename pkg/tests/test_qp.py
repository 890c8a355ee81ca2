import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsanctl import qp
from wsanctl.qp import HAVE_EXTENSION, kkt_residual, solve_qp

BACKENDS = ["python"] + (["compiled"] if HAVE_EXTENSION else [])


def _random_qp(rng, n, m):
    M = rng.normal(size=(n, n))
    H = M @ M.T + 0.1 * np.eye(n)
    f = rng.normal(size=n)
    C = rng.normal(size=(m, n))
    d = rng.normal(size=m) + 1.0  # z=0 is strictly feasible-ish, problem is feasible
    d = np.abs(d)
    return H, f, C, d


@pytest.mark.parametrize("backend", BACKENDS)
def test_unconstrained_is_newton_step(backend):
    rng = np.random.default_rng(0)
    H, f, _, _ = _random_qp(rng, 6, 0)
    res = solve_qp(H, f, backend=backend)
    assert res.ok
    assert np.allclose(res.z, np.linalg.solve(H, -f), atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 8), st.integers(0, 16))
def test_kkt_on_random_feasible_problems(backend, seed, n, m):
    rng = np.random.default_rng(seed)
    H, f, C, d = _random_qp(rng, n, m)
    res = solve_qp(H, f, C, d, backend=backend)
    assert res.ok
    assert res.kkt_residual <= 1e-8
    assert np.all(res.lam >= -1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_detects_infeasibility(backend):
    H = np.eye(2)
    f = np.zeros(2)
    C = np.array([[1.0, 0.0], [-1.0, 0.0]])
    d = np.array([-1.0, -1.0])  # z0 <= -1 and z0 >= 1
    assert solve_qp(H, f, C, d, backend=backend).status == qp.INFEASIBLE


@pytest.mark.skipif(not HAVE_EXTENSION, reason="compiled kernel not built")
def test_backends_agree():
    rng = np.random.default_rng(5)
    for _ in range(100):
        H, f, C, d = _random_qp(rng, 10, 20)
        a = solve_qp(H, f, C, d, backend="python")
        b = solve_qp(H, f, C, d, backend="compiled")
        assert np.allclose(a.z, b.z, atol=1e-8)


def test_matches_cvxpy_when_available():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(9)
    for _ in range(20):
        H, f, C, d = _random_qp(rng, 5, 8)
        z = cp.Variable(5)
        cp.Problem(cp.Minimize(0.5 * cp.quad_form(z, H) + f @ z), [C @ z <= d]).solve(solver=cp.CLARABEL)
        res = solve_qp(H, f, C, d)
        assert np.allclose(res.z, z.value, atol=1e-5)


def test_kkt_residual_flags_wrong_point():
    H, f = np.eye(2), np.array([1.0, 1.0])
    C, d = np.zeros((0, 2)), np.zeros(0)
    assert kkt_residual(H, f, C, d, np.array([-1.0, -1.0]), np.zeros(0)) == 0.0
    assert kkt_residual(H, f, C, d, np.zeros(2), np.zeros(0)) > 0.1


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve_qp(np.eye(1), np.zeros(1), backend="fortran")


def test_env_switch_selects_numpy_backend():
    import os
    import subprocess
    import sys

    code = "import wsanctl.qp as q; print(q.DEFAULT_BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                         env={**os.environ, "WSANCTL_PURE_PYTHON": "1"})
    assert out.stdout.strip() == "python"
