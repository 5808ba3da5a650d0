"""Vectorized numpy kernels.

This module is the fallback backend and the ground truth for parity tests:
``hopfbound._kernels`` (compiled) implements the same four entry points with
per-node C loops and must agree to floating-point roundoff.

Conventions: points and vectors are rows. ``X`` has shape (N, n) with
n = 2k+2 ambient coordinates; adapted frames have shape (N, d, n) with
d = 2k transverse legs. All functions are pure: inputs are never written,
outputs are freshly allocated, so calls are safe across threads.
"""

from __future__ import annotations

import numpy as np

from .errors import NormalizationError

BACKEND = "pure-python"

MIN_FIELD_NORM = 1e-8
FRAME_DROP_THRESHOLD = 1e-6


def _bump_values(X, center, rho0, bump_kind):
    """Radial cutoff profile evaluated at the geodesic distance from center.

    kind 0: (1 - (rho/rho0)^2)^2 inside the cap, 0 outside (C^1 across the
    rim, so boundary values and first derivatives of the field are pinned).
    kind 1: constant 1 (a deliberately non-compliant profile for probes).
    """
    if bump_kind == 1:
        return np.ones(X.shape[0])
    dots = np.clip(X @ center, -1.0, 1.0)
    s2 = (np.arccos(dots) / rho0) ** 2
    return np.where(s2 < 1.0, (1.0 - s2) ** 2, 0.0)


def _generator_sum(X, J, coeffs):
    """Weighted sum of the perturbation generator ladder at each point.

    Generator m = s*n + r is the ambient basis vector a_r pushed through s
    rounds of tangent-projection followed by the complex structure J; level
    s = 0 are the raw constant fields (the outer projection in eval_field
    makes them tangent). By linearity the level-s block collapses to
    (J P_x)^s applied to the constant vector g_s of level coefficients, so
    the whole sum is the Horner chain g_0 + J P (g_1 + J P (g_2 + ...)).
    """
    N, n = X.shape
    m_total = coeffs.shape[0]
    levels = -(-m_total // n)
    g = np.zeros(levels * n)
    g[:m_total] = coeffs
    acc = np.broadcast_to(g[(levels - 1) * n:], (N, n)).copy()
    for s in range(levels - 2, -1, -1):
        acc -= (acc * X).sum(axis=1)[:, None] * X
        acc = acc @ J.T
        acc += g[s * n:(s + 1) * n]
    return acc


def eval_field(X, A, J, coeffs, center, rho0, bump_kind):
    """Evaluate the unit tangent field at each row of X.

    The field is normalize(P_x(A x + psi(x) * sum_m c_m W_m(x))) where P_x
    is the tangent projection and the input point is first radialized, so
    the homogeneous (degree-0) extension is what gets differentiated.
    """
    X = np.asarray(X, dtype=float)
    Xu = X / np.linalg.norm(X, axis=1)[:, None]
    W = Xu @ A.T
    if coeffs.shape[0]:
        psi = _bump_values(Xu, center, rho0, bump_kind)
        W = W + psi[:, None] * _generator_sum(Xu, J, coeffs)
    W = W - (W * Xu).sum(axis=1)[:, None] * Xu
    norms = np.linalg.norm(W, axis=1)
    if np.any(norms < MIN_FIELD_NORM):
        raise NormalizationError(
            "field normalization failed (unnormalized norm %.3e < %.0e); "
            "perturbation coefficients are too large" % (norms.min(), MIN_FIELD_NORM)
        )
    return W / norms[:, None]


def frames(X, V, thresh=FRAME_DROP_THRESHOLD):
    """Orthonormal tangent legs completing {x, v} at each point.

    Candidates are the ambient basis vectors, ordered per point by
    decreasing residual norm after projecting out {x, v} (stable sort, so
    ties resolve to the lower index); Gram-Schmidt with one
    re-orthogonalization pass drops candidates whose running residual falls
    below ``thresh``.
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    N, n = X.shape
    d = n - 2
    R = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    R -= X[:, :, None] * X[:, None, :]
    R -= V[:, :, None] * V[:, None, :]
    order = np.argsort(-np.linalg.norm(R, axis=2), axis=1, kind="stable")
    E = np.zeros((N, d, n))
    count = np.zeros(N, dtype=np.intp)
    rows = np.arange(N)
    for step in range(n):
        r = R[rows, order[:, step], :].copy()
        for _ in range(2):
            r -= (r * X).sum(axis=1)[:, None] * X
            r -= (r * V).sum(axis=1)[:, None] * V
            for j in range(d):
                leg = E[:, j, :]
                r -= (r * leg).sum(axis=1)[:, None] * leg
        nr = np.linalg.norm(r, axis=1)
        accept = (nr > thresh) & (count < d)
        idx = rows[accept]
        E[idx, count[accept], :] = r[idx] / nr[accept, None]
        count += accept
    if np.any(count < d):
        raise RuntimeError("adapted frame construction failed to find enough legs")
    return E


def shape_parts(X, A, J, coeffs, center, rho0, bump_kind, mode, step):
    """Transverse derivative entries of the field at each row of X.

    Returns (H, ACC): H[b, i, j] = <D_{e_i} v, e_j> and
    ACC[b, j] = <D_v v, e_j> in the adapted frame. mode 0 differentiates the
    linear field x -> A x exactly (only valid when coeffs is empty); mode 1
    uses central differences of size ``step`` along great-circle arcs.
    """
    X = np.asarray(X, dtype=float)
    N, n = X.shape
    d = n - 2
    V = eval_field(X, A, J, coeffs, center, rho0, bump_kind)
    E = frames(X, V)
    if mode == 0:
        T = E @ A.T
        H = np.einsum("bin,bjn->bij", T, E)
        ACC = np.einsum("bn,bjn->bj", V @ A.T, E)
    else:
        dirs = np.concatenate([E, V[:, None, :]], axis=1)
        base = X[:, None, :] * np.cos(step)
        offset = dirs * np.sin(step)
        pts = np.concatenate([(base + offset).reshape(-1, n),
                              (base - offset).reshape(-1, n)])
        vals = eval_field(pts, A, J, coeffs, center, rho0, bump_kind)
        half = N * (d + 1)
        D = (vals[:half] - vals[half:]).reshape(N, d + 1, n) / (2.0 * step)
        H = np.einsum("bin,bjn->bij", D[:, :d, :], E)
        ACC = np.einsum("bn,bjn->bj", D[:, d, :], E)
    return H, ACC


def inequality_stats(H):
    """Per-sample building blocks of the diagonal/off-diagonal identities.

    Columns of the returned (N, 10) array:
      0 sum_{i<j} (h_ii - h_jj)^2          (brute-force pair sum)
      1 (d-1) sum h_ii^2 - 2 sum_{i<j} h_ii h_jj
      2 sum_{i<j} (h_ij + h_ji)^2          (brute-force pair sum)
      3 sum_{i!=j} h_ij^2 + 2 sum_{i<j} h_ij h_ji
      4 sum_i h_ii^2
      5 sum_{i<j} h_ii h_jj
      6 sum_{i!=j} h_ij^2
      7 sum_{i,j} h_ij^2
      8 second symmetric function via 2x2 principal minors
      9 second symmetric function via traces of powers
    """
    H = np.asarray(H, dtype=float)
    N, dim = H.shape[0], H.shape[1]
    iu, ju = np.triu_indices(dim, 1)
    diag = np.diagonal(H, axis1=1, axis2=2)
    dii, djj = diag[:, iu], diag[:, ju]
    hij, hji = H[:, iu, ju], H[:, ju, iu]

    sum_d2 = (diag ** 2).sum(axis=1)
    sum_pair_dd = (dii * djj).sum(axis=1)
    sum_all2 = (H ** 2).sum(axis=(1, 2))
    sum_offd2 = sum_all2 - sum_d2

    lhs_diag = ((dii - djj) ** 2).sum(axis=1)
    rhs_diag = (dim - 1) * sum_d2 - 2.0 * sum_pair_dd
    lhs_cross = ((hij + hji) ** 2).sum(axis=1)
    rhs_cross = sum_offd2 + 2.0 * (hij * hji).sum(axis=1)

    s2_minor = (dii * djj - hij * hji).sum(axis=1)
    p1 = diag.sum(axis=1)
    p2 = np.einsum("bij,bji->b", H, H)
    s2_power = 0.5 * (p1 * p1 - p2)

    return np.stack([lhs_diag, rhs_diag, lhs_cross, rhs_cross,
                     sum_d2, sum_pair_dd, sum_offd2, sum_all2,
                     s2_minor, s2_power], axis=1)
