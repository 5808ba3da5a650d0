# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: per-node field evaluation, adapted frames, shape-matrix
entries, and matrix-identity statistics.

Mirrors hopfbound._kernels_py operation for operation; the numpy module is
the reference and parity is enforced by tests. Main loops run without the
GIL so the chunked driver can use real worker threads.
"""

import numpy as np

from libc.math cimport acos, cos, fabs, sin, sqrt

from .errors import NormalizationError

BACKEND = "compiled"

MIN_FIELD_NORM = 1e-8
FRAME_DROP_THRESHOLD = 1e-6

cdef double _MIN_NORM = 1e-8
cdef double _FRAME_THRESH = 1e-6


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef inline void _matvec(const double* A, const double* x, double* out,
                         Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += A[i * n + j] * x[j]
        out[i] = s


cdef int _eval_one(const double* xin, const double* A, const double* J,
                   const double* coeffs, Py_ssize_t m_total,
                   const double* center, double rho0, int bump_kind,
                   Py_ssize_t n, double* v_out, double* work) noexcept nogil:
    """work layout: xu (n) | w (n) | acc (n) | tmp (n). Returns 1 on
    normalization failure, else 0. The generator ladder is evaluated as the
    Horner chain g_0 + J P (g_1 + J P (g_2 + ...)) over the per-level
    coefficient vectors g_s (see the numpy reference)."""
    cdef double* xu = work
    cdef double* w = work + n
    cdef double* acc = work + 2 * n
    cdef double* tmp = work + 3 * n
    cdef Py_ssize_t i, level, idx, levels
    cdef double s, psi, rho

    s = sqrt(_dot(xin, xin, n))
    for i in range(n):
        xu[i] = xin[i] / s
    _matvec(A, xu, w, n)

    if m_total > 0:
        if bump_kind == 1:
            psi = 1.0
        else:
            s = _dot(xu, center, n)
            if s > 1.0:
                s = 1.0
            elif s < -1.0:
                s = -1.0
            rho = acos(s)
            s = (rho / rho0) * (rho / rho0)
            psi = (1.0 - s) * (1.0 - s) if s < 1.0 else 0.0
        if psi != 0.0:
            levels = (m_total + n - 1) // n
            for i in range(n):
                idx = (levels - 1) * n + i
                acc[i] = coeffs[idx] if idx < m_total else 0.0
            for level in range(levels - 2, -1, -1):
                s = _dot(acc, xu, n)
                for i in range(n):
                    tmp[i] = acc[i] - s * xu[i]
                _matvec(J, tmp, acc, n)
                for i in range(n):
                    idx = level * n + i
                    if idx < m_total:
                        acc[i] += coeffs[idx]
            for i in range(n):
                w[i] += psi * acc[i]

    s = _dot(w, xu, n)
    for i in range(n):
        w[i] -= s * xu[i]
    s = sqrt(_dot(w, w, n))
    if s < _MIN_NORM:
        return 1
    for i in range(n):
        v_out[i] = w[i] / s
    return 0


cdef int _frame_one(const double* x, const double* v, double thresh,
                    Py_ssize_t n, Py_ssize_t d, double* E,
                    double* work, Py_ssize_t* order) noexcept nogil:
    """work layout: R (n*n) | norms (n) | r (n). Stable descending sort on
    residual norms, Gram-Schmidt with one re-orthogonalization pass.
    Returns 1 when fewer than d legs were found."""
    cdef double* R = work
    cdef double* norms = work + n * n
    cdef double* r = work + n * n + n
    cdef Py_ssize_t c, i, j, step, cnt, key
    cdef double s, nr
    cdef int p

    for c in range(n):
        for i in range(n):
            R[c * n + i] = (1.0 if i == c else 0.0) - x[c] * x[i] - v[c] * v[i]
        norms[c] = sqrt(_dot(R + c * n, R + c * n, n))
    for c in range(n):
        order[c] = c
    for i in range(1, n):
        key = order[i]
        j = i - 1
        while j >= 0 and norms[order[j]] < norms[key]:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key

    cnt = 0
    for step in range(n):
        if cnt >= d:
            break
        c = order[step]
        for i in range(n):
            r[i] = R[c * n + i]
        for p in range(2):
            s = _dot(r, x, n)
            for i in range(n):
                r[i] -= s * x[i]
            s = _dot(r, v, n)
            for i in range(n):
                r[i] -= s * v[i]
            for j in range(cnt):
                s = _dot(r, E + j * n, n)
                for i in range(n):
                    r[i] -= s * E[j * n + i]
        nr = sqrt(_dot(r, r, n))
        if nr > thresh:
            for i in range(n):
                E[cnt * n + i] = r[i] / nr
            cnt += 1
    return 0 if cnt == d else 1


def eval_field(X, A, J, coeffs, center, double rho0, int bump_kind):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] Jv = np.ascontiguousarray(J, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] ctr = np.ascontiguousarray(center, dtype=np.float64)
    cdef Py_ssize_t N = Xv.shape[0]
    cdef Py_ssize_t n = Xv.shape[1]
    cdef Py_ssize_t m_total = cv.shape[0]
    out_arr = np.empty((N, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    work_arr = np.empty(4 * n, dtype=np.float64)
    cdef double[::1] work = work_arr
    cdef const double* cptr = &cv[0] if m_total > 0 else NULL
    cdef Py_ssize_t b
    cdef int bad = 0
    with nogil:
        for b in range(N):
            if _eval_one(&Xv[b, 0], &Av[0, 0], &Jv[0, 0], cptr, m_total,
                         &ctr[0], rho0, bump_kind, n, &out[b, 0], &work[0]):
                bad = 1
                break
    if bad:
        raise NormalizationError(
            "field normalization failed (norm < %.0e); perturbation "
            "coefficients are too large" % _MIN_NORM)
    return out_arr


def frames(X, V, double thresh=1e-6):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Vv = np.ascontiguousarray(V, dtype=np.float64)
    cdef Py_ssize_t N = Xv.shape[0]
    cdef Py_ssize_t n = Xv.shape[1]
    cdef Py_ssize_t d = n - 2
    out_arr = np.empty((N, d, n), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    work_arr = np.empty(n * n + 2 * n, dtype=np.float64)
    cdef double[::1] work = work_arr
    order_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] order = order_arr
    cdef Py_ssize_t b
    cdef int bad = 0
    with nogil:
        for b in range(N):
            if _frame_one(&Xv[b, 0], &Vv[b, 0], thresh, n, d,
                          &out[b, 0, 0], &work[0], &order[0]):
                bad = 1
                break
    if bad:
        raise RuntimeError("adapted frame construction failed to find enough legs")
    return out_arr


def shape_parts(X, A, J, coeffs, center, double rho0, int bump_kind,
                int mode, double step):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] Jv = np.ascontiguousarray(J, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[::1] ctr = np.ascontiguousarray(center, dtype=np.float64)
    cdef Py_ssize_t N = Xv.shape[0]
    cdef Py_ssize_t n = Xv.shape[1]
    cdef Py_ssize_t d = n - 2
    cdef Py_ssize_t m_total = cv.shape[0]

    H_arr = np.empty((N, d, d), dtype=np.float64)
    ACC_arr = np.empty((N, d), dtype=np.float64)
    cdef double[:, :, ::1] H = H_arr
    cdef double[:, ::1] ACC = ACC_arr

    # scratch: v (n) | E (d*n) | dir work: gp, gm, vp, vm, D (5n) |
    # eval work (4n) | frame work (n*n + 2n)
    work_arr = np.empty(n + d * n + 5 * n + 4 * n + n * n + 2 * n,
                        dtype=np.float64)
    cdef double[::1] work = work_arr
    order_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] order = order_arr

    cdef double* v
    cdef double* E
    cdef double* gp
    cdef double* gm
    cdef double* vp
    cdef double* vm
    cdef double* D
    cdef double* ework
    cdef double* fwork
    v = &work[0]
    E = v + n
    gp = E + d * n
    gm = gp + n
    vp = gm + n
    vm = vp + n
    D = vm + n
    ework = D + n
    fwork = ework + 4 * n

    cdef const double* cptr = &cv[0] if m_total > 0 else NULL
    cdef Py_ssize_t b, a, i, j
    cdef double ch = cos(step)
    cdef double sh = sin(step)
    cdef double s
    cdef const double* dirp
    cdef int bad = 0
    with nogil:
        for b in range(N):
            if _eval_one(&Xv[b, 0], &Av[0, 0], &Jv[0, 0], cptr, m_total,
                         &ctr[0], rho0, bump_kind, n, v, ework):
                bad = 1
                break
            if _frame_one(&Xv[b, 0], v, _FRAME_THRESH, n, d, E, fwork, &order[0]):
                bad = 2
                break
            if mode == 0:
                for i in range(d):
                    _matvec(&Av[0, 0], E + i * n, D, n)
                    for j in range(d):
                        H[b, i, j] = _dot(D, E + j * n, n)
                _matvec(&Av[0, 0], v, D, n)
                for j in range(d):
                    ACC[b, j] = _dot(D, E + j * n, n)
            else:
                for a in range(d + 1):
                    dirp = (E + a * n) if a < d else v
                    for i in range(n):
                        gp[i] = Xv[b, i] * ch + dirp[i] * sh
                        gm[i] = Xv[b, i] * ch - dirp[i] * sh
                    if _eval_one(gp, &Av[0, 0], &Jv[0, 0], cptr, m_total,
                                 &ctr[0], rho0, bump_kind, n, vp, ework):
                        bad = 1
                        break
                    if _eval_one(gm, &Av[0, 0], &Jv[0, 0], cptr, m_total,
                                 &ctr[0], rho0, bump_kind, n, vm, ework):
                        bad = 1
                        break
                    for i in range(n):
                        D[i] = (vp[i] - vm[i]) / (2.0 * step)
                    if a < d:
                        for j in range(d):
                            H[b, a, j] = _dot(D, E + j * n, n)
                    else:
                        for j in range(d):
                            ACC[b, j] = _dot(D, E + j * n, n)
                if bad:
                    break
    if bad == 1:
        raise NormalizationError(
            "field normalization failed (norm < %.0e); perturbation "
            "coefficients are too large" % _MIN_NORM)
    if bad == 2:
        raise RuntimeError("adapted frame construction failed to find enough legs")
    return H_arr, ACC_arr


def inequality_stats(H):
    cdef const double[:, :, ::1] Hv = np.ascontiguousarray(H, dtype=np.float64)
    cdef Py_ssize_t N = Hv.shape[0]
    cdef Py_ssize_t dim = Hv.shape[1]
    out_arr = np.empty((N, 10), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t b, i, j
    cdef double lhs_diag, lhs_cross, sum_d2, sum_pair_dd, sum_all2, sum_offd2
    cdef double cross, s2_minor, p1, p2, hij, hji, dii, djj
    with nogil:
        for b in range(N):
            lhs_diag = 0.0
            lhs_cross = 0.0
            sum_d2 = 0.0
            sum_pair_dd = 0.0
            sum_all2 = 0.0
            cross = 0.0
            s2_minor = 0.0
            p1 = 0.0
            p2 = 0.0
            for i in range(dim):
                dii = Hv[b, i, i]
                sum_d2 += dii * dii
                p1 += dii
                for j in range(dim):
                    sum_all2 += Hv[b, i, j] * Hv[b, i, j]
                    p2 += Hv[b, i, j] * Hv[b, j, i]
                for j in range(i + 1, dim):
                    djj = Hv[b, j, j]
                    hij = Hv[b, i, j]
                    hji = Hv[b, j, i]
                    lhs_diag += (dii - djj) * (dii - djj)
                    lhs_cross += (hij + hji) * (hij + hji)
                    sum_pair_dd += dii * djj
                    cross += hij * hji
                    s2_minor += dii * djj - hij * hji
            sum_offd2 = sum_all2 - sum_d2
            out[b, 0] = lhs_diag
            out[b, 1] = (dim - 1) * sum_d2 - 2.0 * sum_pair_dd
            out[b, 2] = lhs_cross
            out[b, 3] = sum_offd2 + 2.0 * cross
            out[b, 4] = sum_d2
            out[b, 5] = sum_pair_dd
            out[b, 6] = sum_offd2
            out[b, 7] = sum_all2
            out[b, 8] = s2_minor
            out[b, 9] = 0.5 * (p1 * p1 - p2)
    return out_arr
