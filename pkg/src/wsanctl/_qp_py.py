"""Pure-numpy dual active-set QP solver (fallback for the compiled kernel).

Solves ``min 1/2 z'Hz + f'z  s.t.  C z <= d`` for symmetric positive definite
``H`` with the Goldfarb-Idnani dual method.  The factorisation of the active
constraint normals is recomputed with a dense QR after every change of the
active set, which is simple and adequate for horizons of a few hundred
variables.  The compiled kernel updates the same factorisation with Givens
rotations instead.
"""

import numpy as np

OK = 0
INFEASIBLE = 1
MAX_ITER = 2


def solve(H, f, C, d, max_iter=1000, tol=1e-10):
    """Return ``(z, lam, status, iterations)``.

    ``lam`` holds one nonnegative multiplier per row of ``C`` so that
    ``H z + f + C' lam = 0`` at the solution.
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float)
    C = np.asarray(C, dtype=float).reshape(-1, f.size)
    d = np.asarray(d, dtype=float).reshape(-1)
    n = f.size
    m = C.shape[0]

    L = np.linalg.cholesky(H)
    Linv = np.linalg.solve(L, np.eye(n))
    J = Linv.T.copy()
    z = -(Linv.T @ (Linv @ f))
    lam = np.zeros(m)
    if m == 0:
        return z, lam, OK, 0

    # constraints are handled in the >= form  n_i'z >= b_i
    N = -C
    b = -d
    row_norm = np.maximum(np.linalg.norm(N, axis=1), 1e-300)

    active = []
    u = np.zeros(0)
    R = np.zeros((0, 0))
    it = 0

    def refactor(idx):
        nonlocal J, R
        if not idx:
            J = Linv.T.copy()
            R = np.zeros((0, 0))
            return
        Q_, R_ = np.linalg.qr(Linv @ N[idx].T, mode="complete")
        J = Linv.T @ Q_
        R = R_[: len(idx), : len(idx)]

    while True:
        slack = N @ z - b
        scale = tol * (1.0 + np.abs(b) + row_norm * np.abs(z).max())
        viol = slack / row_norm
        viol[active] = np.inf
        viol[slack >= -scale] = np.inf
        p = int(np.argmin(viol))
        if not np.isfinite(viol[p]):
            break
        u_plus = np.append(u, 0.0)

        while True:
            it += 1
            if it > max_iter:
                lam[active] = u
                return z, lam, MAX_ITER, it
            q = len(active)
            npv = N[p]
            dv = J.T @ npv
            zdir = J[:, q:] @ dv[q:]
            r = np.linalg.solve(R, dv[:q]) if q else np.zeros(0)

            t1 = np.inf
            drop = -1
            for j in range(q):
                if r[j] > 0.0:
                    ratio = u_plus[j] / r[j]
                    if ratio < t1:
                        t1 = ratio
                        drop = j
            d2 = float(dv[q:] @ dv[q:])
            if d2 <= 1e-28 * max(float(dv @ dv), 1e-300):
                t2 = np.inf
            else:
                t2 = -(npv @ z - b[p]) / float(zdir @ npv)

            t = min(t1, t2)
            if not np.isfinite(t):
                lam[active] = u
                return z, lam, INFEASIBLE, it

            if not np.isfinite(t2):
                u_plus[:q] -= t * r
                u_plus[q] += t
                del active[drop]
                u_plus = np.delete(u_plus, drop)
                refactor(active)
                continue

            z = z + t * zdir
            u_plus[:q] -= t * r
            u_plus[q] += t
            if t2 <= t1:
                active.append(p)
                u = u_plus
                refactor(active)
                break
            del active[drop]
            u_plus = np.delete(u_plus, drop)
            refactor(active)

    lam[active] = np.maximum(u, 0.0)
    return z, lam, OK, it
