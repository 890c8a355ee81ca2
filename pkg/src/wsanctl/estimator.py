"""Kalman filter that tolerates missing measurements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass
class EstimatorState:
    x_hat: np.ndarray
    Sigma: np.ndarray
    W: np.ndarray
    Vn: np.ndarray

    @classmethod
    def initial(cls, x_hat, n, p, sigma0=1.0, w=1e-4, v=1e-4):
        return cls(
            np.asarray(x_hat, dtype=float).reshape(-1).copy(),
            sigma0 * np.eye(n),
            w * np.eye(n),
            v * np.eye(p),
        )


def advance(est, model, u_applied, y_delivered=None):
    """One predict step, plus a measurement update when ``y_delivered`` is not None.

    The covariance update uses the Joseph form and is symmetrised afterwards.
    """
    A, B, C = model.A, model.B, model.C
    u = np.atleast_1d(np.asarray(u_applied, dtype=float))
    x = A @ est.x_hat + B @ u
    S = A @ est.Sigma @ A.T + est.W
    S = 0.5 * (S + S.T)
    return correct(EstimatorState(x, S, est.W, est.Vn), model, y_delivered)


def correct(est, model, y_delivered):
    """Measurement update only, for the very first sample before any input was applied."""
    if y_delivered is None:
        return est
    C = model.C
    S = est.Sigma
    y = np.atleast_1d(np.asarray(y_delivered, dtype=float))
    innov_cov = C @ S @ C.T + est.Vn
    try:
        G = np.linalg.solve(innov_cov, C @ S).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular innovation covariance: {innov_cov!r}") from exc
    x = est.x_hat + G @ (y - C @ est.x_hat)
    IKC = np.eye(S.shape[0]) - G @ C
    S = IKC @ S @ IKC.T + G @ est.Vn @ G.T
    return EstimatorState(x, 0.5 * (S + S.T), est.W, est.Vn)
