"""Discrete-time LTI plant, sensor model and setpoint checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError

log = logging.getLogger(__name__)

#: ``||x||_inf`` beyond which a run is declared unstable.
DIVERGENCE_THRESHOLD = 1e3


def _rank(M, rtol=1e-8):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def controllability_matrix(A, B):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A, C):
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


@dataclass
class PlantModel:
    """``x' = A x + B u``, ``y = C x`` sampled every ``dt_plant`` seconds."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt_plant: float = 0.01
    check: bool = True

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B.reshape(-1, 1)
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ConfigurationError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ConfigurationError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise ConfigurationError(f"C has {self.C.shape[1]} columns, expected {n}")
        if self.dt_plant <= 0:
            raise ConfigurationError("dt_plant must be positive")
        if self.check:
            if _rank(controllability_matrix(self.A, self.B)) < n:
                raise ConfigurationError("(A, B) is not controllable")
            if _rank(observability_matrix(self.A, self.C)) < n:
                raise ConfigurationError("(A, C) is not observable")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def substep_model(self, substeps):
        """Model at ``substeps`` times the rate whose zero-order-hold
        composition over ``substeps`` steps reproduces ``(A, B)`` exactly.

        Requires ``A`` to have a real logarithm (no eigenvalues on the closed
        negative real axis).
        """
        if substeps == 1:
            return PlantModel(self.A, self.B, self.C, self.dt_plant, check=False)
        eig = np.linalg.eigvals(self.A)
        if np.any((np.abs(eig.imag) < 1e-12) & (eig.real <= 0)):
            raise ConfigurationError("A has no real matrix root; cannot resample")
        Af = scipy.linalg.fractional_matrix_power(self.A, 1.0 / substeps)
        Af = np.real_if_close(Af, tol=1e6)
        if np.iscomplexobj(Af):
            raise ConfigurationError("matrix root of A is not real")
        acc = np.zeros_like(self.A)
        Ak = np.eye(self.n)
        for _ in range(substeps):
            acc += Ak
            Ak = Ak @ Af
        Bf = np.linalg.solve(acc, self.B)
        return PlantModel(Af, Bf, self.C, self.dt_plant / substeps, check=False)


@dataclass
class PlantState:
    x: np.ndarray
    t: int = 0
    diverged: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)


@dataclass
class DisturbanceProfile:
    """Additive sensor bias active on ``[t_start, t_end]`` seconds."""

    bias: float | np.ndarray = 0.0
    active_interval: tuple[float, float] | None = None

    def __post_init__(self):
        if self.active_interval is not None:
            t0, t1 = self.active_interval
            if t0 > t1:
                raise ConfigurationError("disturbance interval has t_start > t_end")

    def active(self, t_sec):
        if self.active_interval is None:
            return False
        t0, t1 = self.active_interval
        return t0 <= t_sec <= t1


@dataclass
class Setpoint:
    x_bar: np.ndarray
    u_bar: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        self.x_bar = np.asarray(self.x_bar, dtype=float).reshape(-1)
        self.u_bar = np.atleast_1d(np.asarray(self.u_bar, dtype=float)).reshape(-1)


def step(model, state, u):
    u = np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)
    if u.size != model.m or state.x.size != model.n:
        raise ConfigurationError(
            f"step got x of size {state.x.size} and u of size {u.size} "
            f"for a plant with n={model.n}, m={model.m}"
        )
    if not np.all(np.isfinite(u)):
        raise ConfigurationError("non-finite input")
    x = model.A @ state.x + model.B @ u
    diverged = state.diverged or not np.all(np.isfinite(x)) or np.abs(x).max() > DIVERGENCE_THRESHOLD
    return PlantState(x, state.t + 1, diverged)


def measure(model, state, d, t_sec):
    y = model.C @ state.x
    if d is not None and d.active(t_sec):
        y = y + d.bias
    return y


def setpoint_residual(model, sp):
    r = (model.A - np.eye(model.n)) @ sp.x_bar + model.B @ sp.u_bar
    return float(np.linalg.norm(r))


def check_setpoint(model, sp, tol=1e-2):
    """Warn (never raise) when the setpoint is not an equilibrium."""
    res = setpoint_residual(model, sp)
    if res > tol:
        log.warning("setpoint residual %.3g exceeds %.1g; x_bar is not an exact equilibrium", res, tol)
    return res


def equilibrium_for_input(model, u_bar):
    """State that ``u_bar`` holds fixed: ``x = -(A - I)^-1 B u``."""
    M = model.A - np.eye(model.n)
    try:
        return -np.linalg.solve(M, model.B @ np.atleast_1d(u_bar))
    except np.linalg.LinAlgError:
        raise ConfigurationError("A has a unit eigenvalue; equilibrium not unique") from None


def nearest_equilibrium(model, x_target):
    """Exact equilibrium ``(x, u)`` whose state is closest to ``x_target``."""
    M = np.hstack([model.A - np.eye(model.n), model.B])
    basis = scipy.linalg.null_space(M)
    if basis.size == 0:
        raise ConfigurationError("plant has no nonzero equilibrium")
    c, *_ = np.linalg.lstsq(basis[: model.n], np.asarray(x_target, dtype=float), rcond=None)
    z = basis @ c
    return Setpoint(z[: model.n], z[model.n:])
