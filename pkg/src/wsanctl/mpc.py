"""Constrained finite-horizon MPC and its Lyapunov certificate constants.

Everything in this module works in coordinates shifted to the setpoint,
``x - x_bar`` and ``u - u_bar``; the harness shifts at the boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError
from .qp import solve_qp

log = logging.getLogger(__name__)


@dataclass
class Polytope:
    """``{x | G x <= h}``; zero rows means the whole space."""

    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        if self.G.shape[0] != self.h.size:
            raise ConfigurationError(f"polytope has {self.G.shape[0]} rows but {self.h.size} bounds")

    @classmethod
    def whole_space(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        dim = lo.size
        rows, rhs = [], []
        for i in range(dim):
            if np.isfinite(hi[i]):
                e = np.zeros(dim)
                e[i] = 1.0
                rows.append(e)
                rhs.append(hi[i])
            if np.isfinite(lo[i]):
                e = np.zeros(dim)
                e[i] = -1.0
                rows.append(e)
                rhs.append(-lo[i])
        if not rows:
            return cls.whole_space(dim)
        return cls(np.array(rows), np.array(rhs))

    @property
    def dim(self):
        return self.G.shape[1]

    @property
    def bounded_rows(self):
        return self.G.shape[0]

    def contains(self, x, tol=1e-9):
        if self.G.shape[0] == 0:
            return True
        return bool(np.all(self.G @ np.asarray(x, dtype=float) <= self.h + tol))

    def shifted(self, center):
        """The same set expressed in coordinates relative to ``center``."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return Polytope(self.G.copy(), self.h - self.G @ center)


def riccati_step(P, A, B, Q, R):
    BtP = B.T @ P
    gain = np.linalg.solve(R + BtP @ B, BtP @ A)
    Pn = A.T @ P @ A + Q - A.T @ P @ B @ gain
    return 0.5 * (Pn + Pn.T)


def riccati_recursion(A, B, Q, R, P_terminal, steps):
    """Run the time-varying Riccati map ``steps`` times backwards from ``P_terminal``."""
    P = np.array(P_terminal, dtype=float)
    for _ in range(steps):
        P = riccati_step(P, A, B, Q, R)
    return P


def dare_residual(P, A, B, Q, R):
    return float(np.linalg.norm(riccati_step(P, A, B, Q, R) - P) / np.linalg.norm(P))


def solve_dare(A, B, Q, R, tol=1e-12, max_iter=100_000):
    """Stabilising solution of the discrete algebraic Riccati equation.

    Fixed-point iteration of the Riccati map starting from ``Q``; stops when
    the relative change drops below ``tol``.
    """
    A, B, Q, R = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R))
    if B.shape[0] != A.shape[0]:
        B = B.reshape(A.shape[0], -1)
    P = Q.copy()
    for _ in range(max_iter):
        Pn = riccati_step(P, A, B, Q, R)
        change = np.linalg.norm(Pn - P) / max(np.linalg.norm(Pn), 1e-300)
        P = Pn
        if change < tol:
            break
    else:
        raise NumericalError(f"Riccati iteration did not converge in {max_iter} steps")
    if not np.all(np.isfinite(P)):
        raise NumericalError("Riccati iteration diverged")
    return P


def lqr_gain(A, B, R, P):
    A, B, R, P = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, R, P))
    if B.shape[0] != A.shape[0]:
        B = B.reshape(A.shape[0], -1)
    try:
        return -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("R + B'PB is singular") from exc


def terminal_set(X, U, K):
    """``{x in X | K x in U}`` as a single polytope."""
    K = np.atleast_2d(K)
    G = np.vstack([X.G, U.G @ K])
    h = np.concatenate([X.h, U.h])
    return Polytope(G, h)


@dataclass
class LyapunovConstants:
    alpha1: float
    alpha2: float
    alpha3: float
    P: np.ndarray
    K: np.ndarray
    P0: np.ndarray | None = None
    M: np.ndarray | None = None

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha3 > 0):
            raise NumericalError("certificate constants must be positive")
        if self.alpha1 > self.alpha2 * (1 + 1e-12):
            raise NumericalError(f"alpha1={self.alpha1} exceeds alpha2={self.alpha2}")

    @property
    def decay_rate(self):
        return 1.0 - self.alpha3 / self.alpha2


def zero_input_cost_matrix(A, Q, S, N):
    """Quadratic form of the cost accumulated with every input held at zero."""
    M = np.zeros_like(Q, dtype=float)
    Aj = np.eye(A.shape[0])
    for _ in range(N):
        M += Aj.T @ Q @ Aj
        Aj = A @ Aj
    M += Aj.T @ S @ Aj
    return 0.5 * (M + M.T)


def lyapunov_constants(A, B, Q, R, N, beta=1.0, S=None, P=None):
    A, B, Q, R = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R))
    if B.shape[0] != A.shape[0]:
        B = B.reshape(A.shape[0], -1)
    if P is None:
        P = solve_dare(A, B, Q, R)
    K = lqr_gain(A, B, R, P)
    if S is None:
        S = beta * P
    try:
        P0 = riccati_recursion(A, B, Q, R, S, N)
        alpha1 = float(np.linalg.eigvalsh(P0).min())
        M = zero_input_cost_matrix(A, Q, S, N)
        alpha2 = float(np.linalg.eigvalsh(M).max())
        alpha3 = float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min())
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigenvalue computation failed") from exc
    return LyapunovConstants(alpha1, alpha2, alpha3, P, K, P0, M)


def safety_ok(V, consts, gamma):
    if gamma <= 0:
        raise ConfigurationError("gamma must be positive")
    return V <= consts.alpha1 * gamma


def decay_envelope(V0, j, consts):
    return consts.decay_rate**j * V0


@dataclass
class MpcConfig:
    """Weights, horizon and constraint sets of the shifted MPC problem.

    ``U`` and ``X`` are polytopes in shifted coordinates.  ``S`` is
    ``beta * P`` and the terminal set is built from ``X``, ``U`` and the LQR
    gain unless given explicitly.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    N: int
    beta: float = 1.0
    U: Polytope | None = None
    X: Polytope | None = None
    Xf: Polytope | None = None
    S: np.ndarray | None = None
    P: np.ndarray = field(init=False)
    K: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
        m = self.B.shape[1]
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if self.N < 0:
            raise ConfigurationError("horizon N must be nonnegative")
        if self.beta < 1:
            raise ConfigurationError("beta must be >= 1")
        if np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T)).min() < -1e-12:
            raise ConfigurationError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(0.5 * (self.R + self.R.T)).min() <= 0:
            raise ConfigurationError("R must be positive definite")
        if self.U is None:
            self.U = Polytope.whole_space(m)
        if self.X is None:
            self.X = Polytope.whole_space(n)
        self.P = solve_dare(self.A, self.B, self.Q, self.R)
        self.K = lqr_gain(self.A, self.B, self.R, self.P)
        if self.S is None:
            self.S = self.beta * self.P
        if self.Xf is None:
            self.Xf = terminal_set(self.X, self.U, self.K)
        if not self.U.contains(np.zeros(m)) or not self.X.contains(np.zeros(n)):
            raise ConfigurationError("constraint sets must contain the setpoint")
        self._condense()

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def _condense(self):
        n, m, N = self.n, self.m, self.N
        Phi = np.zeros((N * n, n))
        Gam = np.zeros((N * n, N * m))
        Ak = np.eye(n)
        for j in range(N):
            Ak = self.A @ Ak
            Phi[j * n:(j + 1) * n] = Ak
        for j in range(N):
            # x_{j+1} = A x_j + B u_j
            blk = self.B
            for i in range(j, N):
                Gam[i * n:(i + 1) * n, j * m:(j + 1) * m] = blk
                blk = self.A @ blk
        Qbar = np.zeros((N * n, N * n))
        for j in range(N - 1):
            Qbar[j * n:(j + 1) * n, j * n:(j + 1) * n] = self.Q
        if N > 0:
            Qbar[(N - 1) * n:, (N - 1) * n:] = self.S
        Rbar = np.kron(np.eye(N), self.R)
        H = 2.0 * (Gam.T @ Qbar @ Gam + Rbar)
        self._Phi = Phi
        self._Gam = Gam
        self._H = 0.5 * (H + H.T)
        self._F = 2.0 * Gam.T @ Qbar @ Phi

        rows, rhs, dep = [], [], []
        # inputs
        if self.U.bounded_rows:
            rows.append(np.kron(np.eye(N), self.U.G))
            rhs.append(np.tile(self.U.h, N))
            dep.append(np.zeros((N * self.U.bounded_rows, n)))
        # states x_1..x_{N-1}; x_0 is fixed by the estimate
        if self.X.bounded_rows and N > 1:
            Gx = self.X.G
            for j in range(N - 1):
                rows.append(Gx @ Gam[j * n:(j + 1) * n])
                rhs.append(self.X.h)
                dep.append(Gx @ Phi[j * n:(j + 1) * n])
        self._n_core_rows = sum(r.shape[0] for r in rows)
        if self.Xf.bounded_rows and N > 0:
            Gf = self.Xf.G
            rows.append(Gf @ Gam[(N - 1) * n:])
            rhs.append(self.Xf.h)
            dep.append(Gf @ Phi[(N - 1) * n:])
        if rows:
            self._Cin = np.vstack(rows)
            self._d0 = np.concatenate(rhs)
            self._D = np.vstack(dep)
        else:
            self._Cin = np.zeros((0, N * m))
            self._d0 = np.zeros(0)
            self._D = np.zeros((0, n))

    def cost(self, x0, u_seq):
        """Horizon cost of ``u_seq`` from ``x0`` by direct rollout."""
        x = np.asarray(x0, dtype=float).copy()
        total = 0.0
        for u in np.asarray(u_seq, dtype=float).reshape(self.N, self.m):
            total += x @ self.Q @ x + u @ self.R @ u
            x = self.A @ x + self.B @ u
        return float(total + x @ self.S @ x)

    def predict(self, x0, u_seq):
        xs = [np.asarray(x0, dtype=float)]
        for u in np.asarray(u_seq, dtype=float).reshape(self.N, self.m):
            xs.append(self.A @ xs[-1] + self.B @ u)
        return np.array(xs)


@dataclass
class MpcSolution:
    u_seq: np.ndarray
    V: float
    feasible: bool
    kkt_residual: float
    iterations: int = 0


def solve_mpc(x_hat, cfg, backend=None):
    """Optimal input sequence and value ``V`` from the shifted state ``x_hat``.

    If the terminal constraint makes the problem infeasible it is dropped and
    the solution is flagged ``feasible=False``.
    """
    x0 = np.asarray(x_hat, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x0)):
        raise NumericalError("non-finite state estimate")
    if cfg.N == 0:
        return MpcSolution(np.zeros((0, cfg.m)), float(x0 @ cfg.S @ x0), True, 0.0)
    f = cfg._F @ x0
    d = cfg._d0 - cfg._D @ x0
    res = solve_qp(cfg._H, f, cfg._Cin, d, backend=backend)
    feasible = True
    if not res.ok:
        feasible = False
        k = cfg._n_core_rows
        res = solve_qp(cfg._H, f, cfg._Cin[:k], d[:k], backend=backend)
        if not res.ok:
            k_in = cfg.N * cfg.U.bounded_rows
            res = solve_qp(cfg._H, f, cfg._Cin[:k_in], d[:k_in], backend=backend)
            if not res.ok:
                raise NumericalError(f"MPC QP failed with status {res.status}")
        log.debug("terminal constraint dropped at x_hat=%s", x0)
    u_seq = res.z.reshape(cfg.N, cfg.m)
    V = max(cfg.cost(x0, u_seq), 0.0)
    return MpcSolution(u_seq, V, feasible, res.kkt_residual, res.iterations)
