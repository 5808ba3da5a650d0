"""Covariant derivatives, the shape matrix of a unit field, its elementary
symmetric functions, divergence, pointwise energy density, and the energy
integral.

The sphere covariant derivative is the tangential part of the ambient
derivative of the homogeneously extended field. For the linear fields
x -> Ax this is exact (D_y v = A y); otherwise central differences along
great-circle arcs x cos(h) + y sin(h) are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import get_backend, map_chunked
from .fields import FieldSpec, backend_params, eval_field, eval_field_batch
from .sphere import AdaptedFrame, QuadratureRule, SpherePoint, TangentVector, adapted_frame

FD_STEP_DEFAULT = 1e-5


def resolve_mode(spec: FieldSpec, mode: str) -> int:
    """0 = exact derivative of the linear field, 1 = central differences."""
    if mode == "auto":
        return 0 if spec.is_linear else 1
    if mode == "analytic":
        if not spec.is_linear:
            raise ValueError("analytic derivatives exist only for linear fields")
        return 0
    if mode == "fd":
        return 1
    raise ValueError(f"unknown derivative mode {mode!r}")


@dataclass(frozen=True)
class ShapeMatrix:
    """Transverse derivative entries h[i, j] = <D_{e_i} v, e_j> plus the
    acceleration row accel[i] = <D_v v, e_i> in an adapted frame."""

    h: np.ndarray
    accel: np.ndarray
    frame: AdaptedFrame


@dataclass(frozen=True)
class SymmetricFunctions:
    """Coefficients of det(I + t h) in t: values[i-1] is the i-th elementary
    symmetric function of the shape matrix. Frame-independent."""

    values: np.ndarray


@dataclass(frozen=True)
class EnergyReport:
    k: int
    vol: float
    dirichlet: float
    energy: float
    bound: float
    gap: float
    field_kind: str
    derivative_mode: str
    resolution: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "k": self.k, "vol": self.vol, "dirichlet": self.dirichlet,
            "energy": self.energy, "bound": self.bound, "gap": self.gap,
            "field_kind": self.field_kind, "derivative_mode": self.derivative_mode,
            "resolution": self.resolution,
        }

    def csv_row(self) -> dict:
        row = self.to_payload()
        row["resolution"] = "%sx%s" % (self.resolution.get("radial"),
                                       self.resolution.get("angular"))
        return row


def elementary_symmetric(h) -> np.ndarray:
    """Elementary symmetric functions of a (d, d) matrix, or of each matrix
    in an (N, d, d) stack, via the trace-power recursion

        e_m = (1/m) * sum_{j=1..m} (-1)^(j-1) tr(h^j) e_{m-j}

    which avoids eigendecomposition and is exact for skew matrices.
    """
    h = np.asarray(h, dtype=float)
    single = h.ndim == 2
    H = h[None, :, :] if single else h
    N, d = H.shape[0], H.shape[1]
    p = np.empty((N, d))
    power = H
    p[:, 0] = np.einsum("bii->b", power)
    for j in range(1, d):
        power = power @ H
        p[:, j] = np.einsum("bii->b", power)
    e = np.zeros((N, d + 1))
    e[:, 0] = 1.0
    for m in range(1, d + 1):
        acc = np.zeros(N)
        sign = 1.0
        for j in range(1, m + 1):
            acc += sign * p[:, j - 1] * e[:, m - j]
            sign = -sign
        e[:, m] = acc / m
    out = e[:, 1:]
    return out[0] if single else out


def symmetric_functions(shape) -> SymmetricFunctions:
    h = shape.h if isinstance(shape, ShapeMatrix) else np.asarray(shape, float)
    return SymmetricFunctions(elementary_symmetric(h))


def covariant_derivative(spec: FieldSpec, x: SpherePoint, y: TangentVector,
                         mode: str = "auto", step: float = FD_STEP_DEFAULT) -> TangentVector:
    """Tangential part at x of the ambient derivative of the field along y."""
    if resolve_mode(spec, mode) == 0:
        A = backend_params(spec)[0]
        ambient = A @ y.vec
    else:
        ny = y.norm
        if ny == 0.0:
            return TangentVector(x, np.zeros(x.n))
        u = y.vec / ny
        pts = np.stack([x.coords * math.cos(step) + u * math.sin(step),
                        x.coords * math.cos(step) - u * math.sin(step)])
        vp, vm = eval_field_batch(spec, pts)
        ambient = ny * (vp - vm) / (2.0 * step)
    tangential = ambient - (ambient @ x.coords) * x.coords
    return TangentVector(x, tangential)


def shape_parts_batch(spec: FieldSpec, X, mode: str = "auto",
                      step: float = FD_STEP_DEFAULT, threads: int = 1):
    """(H, ACC) stacks for each row of X; the integration workhorse."""
    params = backend_params(spec)
    m = resolve_mode(spec, mode)
    backend = get_backend()
    return map_chunked(lambda C: backend.shape_parts(C, *params, m, step),
                       X, threads=threads)


def shape_matrix(spec: FieldSpec, x: SpherePoint, mode: str = "auto",
                 step: float = FD_STEP_DEFAULT, frame: AdaptedFrame | None = None) -> ShapeMatrix:
    """Shape matrix of the field at one point.

    A caller-supplied frame (any orthonormal completion of {x, v}) may be
    passed to probe frame invariance; the default frame comes from the
    backend's candidate policy.
    """
    if frame is None:
        H, ACC = shape_parts_batch(spec, x.coords[None, :], mode=mode, step=step)
        v = eval_field(spec, x)
        return ShapeMatrix(H[0], ACC[0], adapted_frame(x, v))

    v = frame.v
    d = frame.legs.shape[0]
    h = np.empty((d, d))
    for i in range(d):
        dv = covariant_derivative(spec, x, TangentVector(x, frame.legs[i]),
                                  mode=mode, step=step)
        h[i] = frame.legs @ dv.vec
    acc = frame.legs @ covariant_derivative(spec, x, v, mode=mode, step=step).vec
    return ShapeMatrix(h, acc, frame)


def divergence(spec: FieldSpec, x: SpherePoint, mode: str = "auto",
               step: float = FD_STEP_DEFAULT) -> float:
    """Trace of the shape matrix. The acceleration row contributes nothing
    because <D_v v, v> = 0 for a unit field."""
    H, _ = shape_parts_batch(spec, x.coords[None, :], mode=mode, step=step)
    return float(np.trace(H[0]))


def energy_density(spec: FieldSpec, x: SpherePoint, mode: str = "auto",
                   step: float = FD_STEP_DEFAULT) -> float:
    """|grad v|^2 = sum h_ij^2 + sum accel_i^2."""
    H, ACC = shape_parts_batch(spec, x.coords[None, :], mode=mode, step=step)
    return float((H[0] ** 2).sum() + (ACC[0] ** 2).sum())


def sigma_batch(spec: FieldSpec, X, mode: str = "auto",
                step: float = FD_STEP_DEFAULT, threads: int = 1) -> np.ndarray:
    """Elementary symmetric functions of the shape matrix at each row of X."""
    H, _ = shape_parts_batch(spec, X, mode=mode, step=step, threads=threads)
    return elementary_symmetric(H)


def hopf_symmetric_values(k: int) -> np.ndarray:
    """Symmetric-function values of any Hopf field: binomial(k, i/2) for
    even i, zero for odd i; length 2k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = np.zeros(2 * k)
    for i in range(2, 2 * k + 1, 2):
        out[i - 1] = math.comb(k, i // 2)
    return out


def energy_lower_bound(k: int, vol: float) -> float:
    """((2k+1)/2 + k) * vol: the solenoidal boundary-pinned floor, attained
    by Hopf fields."""
    if vol < 0:
        raise ValueError("volume must be nonnegative")
    return ((2 * k + 1) / 2.0 + k) * vol


def energy(spec: FieldSpec, rule: QuadratureRule, k: int | None = None,
           mode: str = "auto", step: float = FD_STEP_DEFAULT,
           threads: int = 1) -> EnergyReport:
    """Total energy (2k+1)/2 * vol(K) + 1/2 * integral of |grad v|^2.

    The reduction uses exact compensated summation, so results are
    reproducible for any chunking or thread count.
    """
    if k is not None and k != rule.k:
        raise ValueError(f"k={k} does not match rule.k={rule.k}")
    k = rule.k
    H, ACC = shape_parts_batch(spec, rule.nodes, mode=mode, step=step, threads=threads)
    density = (H ** 2).sum(axis=(1, 2)) + (ACC ** 2).sum(axis=1)
    dirichlet = math.fsum((rule.weights * density).tolist())
    vol = rule.volume
    total = 0.5 * (2 * k + 1) * vol + 0.5 * dirichlet
    bound = energy_lower_bound(k, vol)
    return EnergyReport(
        k=k, vol=vol, dirichlet=dirichlet, energy=total, bound=bound,
        gap=total - bound, field_kind=spec.kind,
        derivative_mode="analytic" if resolve_mode(spec, mode) == 0 else "fd",
        resolution=rule.resolution_payload(),
    )
