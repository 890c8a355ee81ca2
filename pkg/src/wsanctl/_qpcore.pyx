# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dual active-set QP kernel.

Same contract as ``wsanctl._qp_py.solve``.  The factorisation ``J' N_A = [R; 0]``
of the active constraint normals is maintained with Givens rotations, so each
change of the active set costs O(n^2) instead of a fresh QR.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()

DEF OK = 0
DEF INFEASIBLE = 1
DEF MAX_ITER = 2


cdef inline double _hypot(double a, double b) nogil:
    cdef double aa = fabs(a), bb = fabs(b), t
    if aa > bb:
        t = bb / aa
        return aa * sqrt(1.0 + t * t)
    if bb == 0.0:
        return 0.0
    t = aa / bb
    return bb * sqrt(1.0 + t * t)


cdef void _rotate_cols(double[:, ::1] J, Py_ssize_t i, Py_ssize_t k,
                       double c, double s, Py_ssize_t n) nogil:
    # (J[:, i], J[:, k]) <- (c J_i + s J_k, -s J_i + c J_k)
    cdef Py_ssize_t r
    cdef double a, b
    for r in range(n):
        a = J[r, i]
        b = J[r, k]
        J[r, i] = c * a + s * b
        J[r, k] = -s * a + c * b


cdef int _cholesky(double[:, ::1] A, double[:, ::1] L, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return -1
        L[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
        for i in range(j):
            L[i, j] = 0.0
    return 0


def solve(H, f, C, d, int max_iter=1000, double tol=1e-10):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Ha = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fa = np.ascontiguousarray(f, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = fa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Ca = np.ascontiguousarray(C, dtype=np.float64).reshape(-1, n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.ascontiguousarray(d, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t m = Ca.shape[0]

    cdef double[:, ::1] Hv = Ha
    cdef double[:, ::1] Cv = Ca
    cdef double[::1] fv = fa
    cdef double[::1] dv_ = da

    L_arr = np.zeros((n, n))
    cdef double[:, ::1] L = L_arr
    if _cholesky(Hv, L, n) != 0:
        raise np.linalg.LinAlgError("Hessian is not positive definite")

    # J = L^{-T}: solve L X = I, then transpose
    J_arr = np.zeros((n, n))
    cdef double[:, ::1] J = J_arr
    cdef Py_ssize_t i, j, k, r, col
    cdef double s
    for col in range(n):
        for i in range(n):
            s = 1.0 if i == col else 0.0
            for k in range(i):
                s -= L[i, k] * J[col, k]
            J[col, i] = s / L[i, i]
    # J currently holds L^{-1} row-wise transposed: J[col, i] = (L^{-1})[i, col],
    # so J[c, i] as a matrix equals (L^{-1})' = L^{-T}

    z_arr = np.zeros(n)
    cdef double[::1] z = z_arr
    # z = -H^{-1} f = -J J' f
    tmp_arr = np.zeros(n)
    cdef double[::1] tmp = tmp_arr
    for i in range(n):
        s = 0.0
        for k in range(n):
            s += J[k, i] * fv[k]
        tmp[i] = s
    for i in range(n):
        s = 0.0
        for k in range(n):
            s += J[i, k] * tmp[k]
        z[i] = -s

    lam_arr = np.zeros(m)
    cdef double[::1] lam = lam_arr
    if m == 0:
        return z_arr, lam_arr, OK, 0

    norm_arr = np.zeros(m)
    cdef double[::1] rnorm = norm_arr
    for i in range(m):
        s = 0.0
        for k in range(n):
            s += Cv[i, k] * Cv[i, k]
        rnorm[i] = sqrt(s) if s > 0.0 else 1e-300

    R_arr = np.zeros((n, n))
    cdef double[:, ::1] R = R_arr
    act_arr = np.full(n, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] act = act_arr
    is_act_arr = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] is_act = is_act_arr
    u_arr = np.zeros(n + 1)
    cdef double[::1] u = u_arr
    up_arr = np.zeros(n + 1)
    cdef double[::1] up = up_arr
    dvec_arr = np.zeros(n)
    cdef double[::1] dvec = dvec_arr
    zd_arr = np.zeros(n)
    cdef double[::1] zd = zd_arr
    rr_arr = np.zeros(n)
    cdef double[::1] rr = rr_arr
    npv_arr = np.zeros(n)
    cdef double[::1] npv = npv_arr

    cdef Py_ssize_t q = 0, p, drop, it = 0
    cdef double zmax, slack, scale, viol, best, t1, t2, t, ratio, d2, dd, ztn, h, c_, s_
    cdef int status = OK

    while True:
        zmax = 0.0
        for k in range(n):
            if fabs(z[k]) > zmax:
                zmax = fabs(z[k])
        p = -1
        best = INFINITY
        for i in range(m):
            if is_act[i]:
                continue
            slack = dv_[i]
            for k in range(n):
                slack -= Cv[i, k] * z[k]
            # slack of the >= form  (-C_i) z >= -d_i  equals d_i - C_i z
            scale = tol * (1.0 + fabs(dv_[i]) + rnorm[i] * zmax)
            if slack >= -scale:
                continue
            viol = slack / rnorm[i]
            if viol < best:
                best = viol
                p = i
        if p < 0:
            break
        for k in range(n):
            npv[k] = -Cv[p, k]
        for j in range(q):
            up[j] = u[j]
        up[q] = 0.0

        while True:
            it += 1
            if it > max_iter:
                status = MAX_ITER
                break
            # dvec = J' n_p
            for j in range(n):
                s = 0.0
                for k in range(n):
                    s += J[k, j] * npv[k]
                dvec[j] = s
            # zd = J2 d2
            for k in range(n):
                s = 0.0
                for j in range(q, n):
                    s += J[k, j] * dvec[j]
                zd[k] = s
            # rr = R^{-1} d1 (upper triangular back substitution)
            for j in range(q - 1, -1, -1):
                s = dvec[j]
                for k in range(j + 1, q):
                    s -= R[j, k] * rr[k]
                rr[j] = s / R[j, j]

            t1 = INFINITY
            drop = -1
            for j in range(q):
                if rr[j] > 0.0:
                    ratio = up[j] / rr[j]
                    if ratio < t1:
                        t1 = ratio
                        drop = j
            d2 = 0.0
            dd = 0.0
            for j in range(n):
                dd += dvec[j] * dvec[j]
                if j >= q:
                    d2 += dvec[j] * dvec[j]
            if d2 <= 1e-28 * (dd if dd > 1e-300 else 1e-300):
                t2 = INFINITY
            else:
                slack = dv_[p]
                ztn = 0.0
                for k in range(n):
                    slack -= Cv[p, k] * z[k]
                    ztn += zd[k] * npv[k]
                # n_p'z - b_p equals d_p - C_p z
                t2 = -slack / ztn
            t = t1 if t1 < t2 else t2
            if t == INFINITY:
                status = INFEASIBLE
                break

            if t2 != INFINITY:
                for k in range(n):
                    z[k] += t * zd[k]
            for j in range(q):
                up[j] -= t * rr[j]
            up[q] += t

            if t2 != INFINITY and t2 <= t1:
                # add p: rotate dvec[q+1..n-1] into dvec[q]
                for j in range(n - 1, q, -1):
                    if dvec[j] == 0.0:
                        continue
                    h = _hypot(dvec[j - 1], dvec[j])
                    c_ = dvec[j - 1] / h
                    s_ = dvec[j] / h
                    dvec[j - 1] = h
                    dvec[j] = 0.0
                    _rotate_cols(J, j - 1, j, c_, s_, n)
                for j in range(q + 1):
                    R[j, q] = dvec[j]
                act[q] = p
                is_act[p] = 1
                q += 1
                for j in range(q):
                    u[j] = up[j]
                break

            # drop active constraint at position `drop`
            is_act[act[drop]] = 0
            for j in range(drop, q - 1):
                act[j] = act[j + 1]
                up[j] = up[j + 1]
                for k in range(q):
                    R[k, j] = R[k, j + 1]
            up[q - 1] = up[q]
            for k in range(q):
                R[k, q - 1] = 0.0
            q -= 1
            # restore triangularity: zero subdiagonal R[j+1, j]
            for j in range(drop, q):
                if R[j + 1, j] == 0.0:
                    continue
                h = _hypot(R[j, j], R[j + 1, j])
                c_ = R[j, j] / h
                s_ = R[j + 1, j] / h
                for col in range(j, q):
                    dd = R[j, col]
                    d2 = R[j + 1, col]
                    R[j, col] = c_ * dd + s_ * d2
                    R[j + 1, col] = -s_ * dd + c_ * d2
                R[j + 1, j] = 0.0
                _rotate_cols(J, j, j + 1, c_, s_, n)
        if status != OK:
            break

    for j in range(q):
        lam[act[j]] = u[j] if u[j] > 0.0 else 0.0
    return z_arr, lam_arr, status, it
