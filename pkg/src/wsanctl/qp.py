"""Strictly convex QP front end.

The compiled kernel ``wsanctl._qpcore`` is used when it was built; otherwise,
or when ``WSANCTL_PURE_PYTHON=1`` is set, the numpy implementation in
``wsanctl._qp_py`` takes over.  Both run the same dual active-set method and
agree to rounding.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _qp_py

try:
    from . import _qpcore
except ImportError:  # pragma: no cover - depends on the build
    _qpcore = None

OK = _qp_py.OK
INFEASIBLE = _qp_py.INFEASIBLE
MAX_ITER = _qp_py.MAX_ITER

HAVE_EXTENSION = _qpcore is not None
_BACKENDS = {"python": _qp_py.solve}
if HAVE_EXTENSION:
    _BACKENDS["compiled"] = _qpcore.solve

if os.environ.get("WSANCTL_PURE_PYTHON") == "1" or not HAVE_EXTENSION:
    DEFAULT_BACKEND = "python"
else:
    DEFAULT_BACKEND = "compiled"


@dataclass
class QpResult:
    z: np.ndarray
    lam: np.ndarray
    status: int
    iterations: int
    kkt_residual: float

    @property
    def ok(self):
        return self.status == OK


def kkt_residual(H, f, C, d, z, lam):
    """Scaled KKT residual: stationarity, primal feasibility, complementarity."""
    grad = H @ z + f
    stat = np.abs(grad + C.T @ lam).max(initial=0.0)
    stat /= 1.0 + np.abs(f).max(initial=0.0) + np.abs(H @ z).max(initial=0.0)
    if C.shape[0] == 0:
        return float(stat)
    g = C @ z - d
    dscale = 1.0 + np.abs(d).max() + np.abs(C).max() * np.abs(z).max(initial=0.0)
    primal = max(g.max(), 0.0) / dscale
    comp = np.abs(lam * g).max() / (dscale * (1.0 + lam.max()))
    dual = max(-lam.min(), 0.0)
    return float(max(stat, primal, comp, dual))


def solve_qp(H, f, C=None, d=None, backend=None, max_iter=1000):
    """Minimise ``1/2 z'Hz + f'z`` subject to ``C z <= d``."""
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float).reshape(-1)
    if C is None:
        C = np.zeros((0, f.size))
        d = np.zeros(0)
    C = np.asarray(C, dtype=float).reshape(-1, f.size)
    d = np.asarray(d, dtype=float).reshape(-1)
    name = backend or DEFAULT_BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"unknown QP backend {name!r}; available: {sorted(_BACKENDS)}")
    fn = _BACKENDS[name]
    z, lam, status, it = fn(H, f, C, d, max_iter)
    z = np.asarray(z)
    lam = np.asarray(lam)
    res = kkt_residual(H, f, C, d, z, lam) if status == OK else float("inf")
    return QpResult(z, lam, int(status), int(it), res)
