"""The displacement map x -> x + t v(x), its Jacobian determinant (closed
form and finite differences), volume transport, and the moment identities
for the integrals of the symmetric functions.

For unit tangent v the displaced point lies on the sphere of radius
sqrt(1+t^2); the companion unit field (v - t x)/sqrt(1+t^2) is tangent to
that sphere at the image and completes the image frame {e_1, ..., e_2k, u}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import get_backend
from .errors import NonDiffeomorphicError
from .fields import FieldSpec, backend_params, eval_field_batch
from .shape import (FD_STEP_DEFAULT, SymmetricFunctions, hopf_symmetric_values,
                    sigma_batch)
from .sphere import QuadratureRule, SpherePoint

DIFFEO_PROBE_GRID = (0.01, 0.02, 0.05, 0.1)


def displacement(spec: FieldSpec, x: SpherePoint, t: float) -> np.ndarray:
    """x + t v(x), an ambient point of norm sqrt(1+t^2)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    v = eval_field_batch(spec, x.coords[None, :])[0]
    return x.coords + t * v


def displaced_field(spec: FieldSpec, x: SpherePoint, t: float) -> np.ndarray:
    """Unit vector (v(x) - t x)/sqrt(1+t^2), tangent to the image sphere at
    the displaced point."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    v = eval_field_batch(spec, x.coords[None, :])[0]
    return (v - t * x.coords) / math.sqrt(1.0 + t * t)


def jacobian_det_closed_form(sym, t: float) -> float:
    """sqrt(1+t^2) * (1 + sum_i values[i-1] * t^i)."""
    values = sym.values if isinstance(sym, SymmetricFunctions) else np.asarray(sym, float)
    powers = t ** np.arange(1, values.shape[-1] + 1)
    return math.sqrt(1.0 + t * t) * (1.0 + float(values @ powers))


def _jacobian_matrices(spec: FieldSpec, X, t: float, step: float):
    """Stack of (2k+1)x(2k+1) matrices <dphi_t(dir_a), image-frame leg> built
    by central differences along great-circle arcs; image frame legs are the
    source frame legs plus the companion field."""
    X = np.ascontiguousarray(X, dtype=float)
    N, n = X.shape
    d = n - 2
    params = backend_params(spec)
    backend = get_backend()
    V = backend.eval_field(X, *params)
    E = backend.frames(X, V)
    dirs = np.concatenate([E, V[:, None, :]], axis=1)  # (N, d+1, n)

    base = X[:, None, :] * math.cos(step)
    offset = dirs * math.sin(step)
    pts = np.concatenate([(base + offset).reshape(-1, n),
                          (base - offset).reshape(-1, n)])
    vals = backend.eval_field(pts, *params)
    images = pts + t * vals
    half = N * (d + 1)
    D = (images[:half] - images[half:]).reshape(N, d + 1, n) / (2.0 * step)

    u = (V - t * X) / math.sqrt(1.0 + t * t)
    cols = np.concatenate([E, u[:, None, :]], axis=1)
    return np.einsum("ban,bcn->bac", D, cols)


def jacobian_matrix(spec: FieldSpec, x: SpherePoint, t: float,
                    step: float = FD_STEP_DEFAULT) -> np.ndarray:
    return _jacobian_matrices(spec, x.coords[None, :], t, step)[0]


def jacobian_det_numeric(spec: FieldSpec, x: SpherePoint, t: float,
                         step: float = FD_STEP_DEFAULT) -> float:
    """Determinant of the finite-difference Jacobian; raises when the map
    has left its diffeomorphism range."""
    det = float(np.linalg.det(jacobian_matrix(spec, x, t, step)))
    if det <= 0.0:
        raise NonDiffeomorphicError(
            f"nonpositive Jacobian determinant {det:.3e} at t={t}")
    return det


def jacobian_det_numeric_batch(spec: FieldSpec, X, t: float,
                               step: float = FD_STEP_DEFAULT) -> np.ndarray:
    M = _jacobian_matrices(spec, X, t, step)
    dets = np.linalg.det(M)
    if np.any(dets <= 0.0):
        raise NonDiffeomorphicError(
            f"nonpositive Jacobian determinant (min {dets.min():.3e}) at t={t}")
    return dets


def jacobian_entry_errors(spec: FieldSpec, X, t: float,
                          step: float = FD_STEP_DEFAULT) -> dict:
    """Deviations of the structural entries: the companion-field column must
    vanish for transverse rows and equal sqrt(1+t^2) for the field row."""
    M = _jacobian_matrices(spec, X, t, step)
    d = M.shape[1] - 1
    return {
        "max_leg_companion": float(np.max(np.abs(M[:, :d, d]))),
        "max_field_companion": float(np.max(np.abs(M[:, d, d] - math.sqrt(1 + t * t)))),
    }


def diffeomorphism_t_max(spec: FieldSpec, X, t_probes=DIFFEO_PROBE_GRID,
                         step: float = FD_STEP_DEFAULT) -> float:
    """Largest probe t for which the numeric determinant stays positive at
    every row of X; 0.0 if none do."""
    best = 0.0
    for t in sorted(t_probes):
        dets = np.linalg.det(_jacobian_matrices(spec, X, float(t), step))
        if np.all(dets > 0.0):
            best = float(t)
    return best


def volume_transport(spec: FieldSpec, rule: QuadratureRule, t: float,
                     mode: str = "auto", step: float = FD_STEP_DEFAULT,
                     threads: int = 1) -> float:
    """Integral over K of the closed-form Jacobian determinant: the volume
    of the displaced domain."""
    sig = sigma_batch(spec, rule.nodes, mode=mode, step=step, threads=threads)
    return _transport_from_sigma(sig, rule.weights, t)


def _transport_from_sigma(sig: np.ndarray, weights: np.ndarray, t: float) -> float:
    powers = t ** np.arange(1, sig.shape[1] + 1)
    integrand = math.sqrt(1.0 + t * t) * (1.0 + sig @ powers)
    return math.fsum((weights * integrand).tolist())


@dataclass(frozen=True)
class TransportReport:
    k: int
    vol: float
    t_grid: np.ndarray
    vol_formula: np.ndarray     # per-t transported volume from the integrand
    vol_reference: np.ndarray   # per-t sqrt(1+t^2)(1 + sum eta_i t^i) * vol
    moments_direct: np.ndarray  # integral of each symmetric function
    moments_fitted: np.ndarray  # same, recovered from the t-grid polynomial fit
    residual_direct: np.ndarray
    residual_fitted: np.ndarray
    fit_condition: float
    resolution: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "k": self.k, "vol": self.vol,
            "t_grid": self.t_grid.tolist(),
            "vol_formula": self.vol_formula.tolist(),
            "vol_reference": self.vol_reference.tolist(),
            "moments_direct": self.moments_direct.tolist(),
            "moments_fitted": self.moments_fitted.tolist(),
            "residual_direct": self.residual_direct.tolist(),
            "residual_fitted": self.residual_fitted.tolist(),
            "fit_condition": self.fit_condition,
            "resolution": self.resolution,
        }


def default_t_grid(k: int) -> np.ndarray:
    """Grid in (0, 0.1] with enough points to identify a degree-2k polynomial."""
    return np.linspace(0.01, 0.1, max(2 * k + 2, 4))


def moment_identities(spec: FieldSpec, rule: QuadratureRule, t_grid=None,
                      mode: str = "auto", step: float = FD_STEP_DEFAULT,
                      threads: int = 1) -> TransportReport:
    """Integrals of the symmetric functions over K, two ways.

    Directly by quadrature, and by a least-squares polynomial fit of the
    transported volume divided by sqrt(1+t^2) against the t-grid. For
    solenoidal fields pinned to Hopf on the rim both must equal the Hopf
    reference values times vol(K); residuals are reported, not asserted.
    """
    k = rule.k
    d = 2 * k
    t = np.asarray(default_t_grid(k) if t_grid is None else t_grid, dtype=float)
    if t.ndim != 1 or t.shape[0] < d + 1:
        raise ValueError(f"t grid needs at least {d + 1} values")
    if np.unique(t).shape[0] != t.shape[0]:
        raise ValueError("t grid values must be distinct")

    sig = sigma_batch(spec, rule.nodes, mode=mode, step=step, threads=threads)
    vol = rule.volume
    moments_direct = np.array([math.fsum((rule.weights * sig[:, i]).tolist())
                               for i in range(d)])
    vol_formula = np.array([_transport_from_sigma(sig, rule.weights, float(ti))
                            for ti in t])
    eta = hopf_symmetric_values(k)
    vol_reference = np.array([jacobian_det_closed_form(eta, float(ti)) * vol
                              for ti in t])

    # scaled Vandermonde fit of vol_formula/sqrt(1+t^2) = vol + sum m_i t^i
    y = vol_formula / np.sqrt(1.0 + t * t)
    t_ref = t.max()
    V = np.vander(t / t_ref, N=d + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    moments_fitted = coef[1:] / t_ref ** np.arange(1, d + 1)

    return TransportReport(
        k=k, vol=vol, t_grid=t,
        vol_formula=vol_formula, vol_reference=vol_reference,
        moments_direct=moments_direct, moments_fitted=moments_fitted,
        residual_direct=np.abs(moments_direct - eta * vol),
        residual_fitted=np.abs(moments_fitted - eta * vol),
        fit_condition=float(np.linalg.cond(V)),
        resolution=rule.resolution_payload(),
    )
