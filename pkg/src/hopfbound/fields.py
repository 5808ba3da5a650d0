"""Unit vector fields on the sphere: the Hopf field, rotated copies, and
boundary-pinned perturbation families.

A perturbed field is normalize(P_x(H(x) + psi(x) * sum_m c_m W_m(x))) where
H(x) = Jx, psi is a radial bump vanishing (with its first derivative) at the
cap rim, and the generators W_m are the ambient basis fields pushed through
repeated project-then-rotate rounds; see generator_ladder_size. Fields are
extended degree-0 homogeneously, so ambient directional derivatives are
well-defined.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._backend import get_backend, map_chunked
from .sphere import (SpherePoint, TangentVector, QuadratureRule, ambient_dim,
                     canonical_center, complex_structure)

FIELD_SCHEMA = "hopfbound/field"
FIELD_VERSION = 1

KIND_HOPF = "hopf"
KIND_ROTATED = "rotated_hopf"
KIND_PERTURBED = "perturbed"

BUMP_POLY = "poly"   # (1 - (rho/rho0)^2)^2 inside the cap, 0 outside
BUMP_CONST = "const"  # identically 1; violates boundary pinning on purpose

_BUMP_KIND_CODE = {BUMP_POLY: 0, BUMP_CONST: 1}


def generator_ladder_size(k: int, levels: int = 3) -> int:
    """Default perturbation generator count: ``levels`` rungs of 2k+2 each
    (constant fields plus their repeated projected J-rotations); 12 for k=1."""
    return levels * ambient_dim(k)


@dataclass(frozen=True)
class BumpProfile:
    """Scalar radial profile about ``center``; the default kind vanishes to
    first order at rho0 so perturbed fields stay pinned on the cap rim."""

    rho0: float
    center: SpherePoint
    kind: str = BUMP_POLY

    def __post_init__(self):
        if self.kind not in _BUMP_KIND_CODE:
            raise ValueError(f"unknown bump kind {self.kind!r}")
        if not 0.0 < self.rho0 <= math.pi:
            raise ValueError("bump radius must satisfy 0 < rho0 <= pi")

    def value(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == BUMP_CONST:
            return np.ones_like(rho)
        s2 = (rho / self.rho0) ** 2
        return np.where(s2 < 1.0, (1.0 - s2) ** 2, 0.0)


@dataclass(frozen=True)
class FieldSpec:
    """One of: the Hopf field x -> Jx; its conjugate Q J Q^T x by an
    orthogonal Q; or a Hopf field perturbed inside a bump-supported cap."""

    kind: str
    k: int
    rotation: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    bump: BumpProfile | None = None

    def __post_init__(self):
        n = ambient_dim(self.k)
        if self.kind == KIND_HOPF:
            if self.rotation is not None or self.coefficients is not None:
                raise ValueError("hopf field takes no rotation or coefficients")
        elif self.kind == KIND_ROTATED:
            Q = np.ascontiguousarray(self.rotation, dtype=float)
            if Q.shape != (n, n):
                raise ValueError(f"rotation must be {n}x{n}")
            if np.max(np.abs(Q.T @ Q - np.eye(n))) > 1e-10:
                raise ValueError("rotation matrix is not orthogonal")
            object.__setattr__(self, "rotation", Q)
            Q.flags.writeable = False
        elif self.kind == KIND_PERTURBED:
            if self.bump is None:
                raise ValueError("perturbed field needs a bump profile")
            if self.bump.center.k != self.k:
                raise ValueError("bump center dimension does not match k")
            c = np.ascontiguousarray(self.coefficients, dtype=float)
            if c.ndim != 1:
                raise ValueError("coefficients must be a 1-D vector")
            object.__setattr__(self, "coefficients", c)
            c.flags.writeable = False
        else:
            raise ValueError(f"unknown field kind {self.kind!r}")

    @staticmethod
    def hopf(k: int) -> "FieldSpec":
        return FieldSpec(KIND_HOPF, k)

    @staticmethod
    def rotated_hopf(rotation) -> "FieldSpec":
        Q = np.asarray(rotation, dtype=float)
        return FieldSpec(KIND_ROTATED, k_from_matrix(Q), rotation=Q)

    @staticmethod
    def perturbed(k: int, coefficients, bump: BumpProfile) -> "FieldSpec":
        return FieldSpec(KIND_PERTURBED, k, coefficients=np.asarray(coefficients, float),
                         bump=bump)

    @property
    def is_linear(self) -> bool:
        """True when the field is x -> Ax for a fixed matrix A (exact
        derivatives available)."""
        return self.kind in (KIND_HOPF, KIND_ROTATED)


def k_from_matrix(Q: np.ndarray) -> int:
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("rotation must be a square matrix")
    from .sphere import k_from_ambient
    return k_from_ambient(Q.shape[0])


def backend_params(spec: FieldSpec):
    """Normalized (A, J, coeffs, center, rho0, bump_kind) arrays for the
    kernel backends."""
    n = ambient_dim(spec.k)
    J = complex_structure(spec.k)
    if spec.kind == KIND_ROTATED:
        A = np.ascontiguousarray(spec.rotation @ J @ spec.rotation.T)
    else:
        A = J
    if spec.kind == KIND_PERTURBED:
        coeffs = spec.coefficients
        center = np.ascontiguousarray(spec.bump.center.coords)
        rho0 = spec.bump.rho0
        bump_kind = _BUMP_KIND_CODE[spec.bump.kind]
    else:
        coeffs = np.empty(0)
        center = np.ascontiguousarray(canonical_center(spec.k).coords)
        rho0 = math.pi
        bump_kind = 0
    return A, J, coeffs, center, rho0, bump_kind


def eval_hopf(x: SpherePoint) -> TangentVector:
    """Hopf field value Jx: automatically unit and tangent."""
    from .sphere import apply_complex_structure
    return TangentVector(x, apply_complex_structure(x.coords, x.k))


def eval_field_batch(spec: FieldSpec, X, threads: int = 1) -> np.ndarray:
    """Unit tangent field values at each row of X."""
    params = backend_params(spec)
    backend = get_backend()
    return map_chunked(lambda C: backend.eval_field(C, *params), X, threads=threads)


def eval_field(spec: FieldSpec, x: SpherePoint) -> TangentVector:
    v = eval_field_batch(spec, x.coords[None, :])[0]
    return TangentVector(x, v)


def boundary_mismatch(spec: FieldSpec, rule: QuadratureRule) -> float:
    """Max over boundary nodes of |v(x) - H(x)|."""
    B = rule.boundary_nodes
    if B.shape[0] == 0:
        raise ValueError("quadrature rule has no boundary nodes")
    V = eval_field_batch(spec, B)
    H = B @ complex_structure(rule.k).T
    return float(np.max(np.linalg.norm(V - H, axis=1)))


def field_to_payload(spec: FieldSpec) -> dict:
    out = {"schema": FIELD_SCHEMA, "version": FIELD_VERSION,
           "kind": spec.kind, "k": spec.k}
    if spec.kind == KIND_ROTATED:
        out["Q"] = spec.rotation.tolist()
    elif spec.kind == KIND_PERTURBED:
        out["coefficients"] = spec.coefficients.tolist()
        out["bump"] = {"type": spec.bump.kind, "rho0": spec.bump.rho0,
                       "center": spec.bump.center.coords.tolist()}
    return out


def field_from_payload(payload: dict) -> FieldSpec:
    if payload.get("schema") not in (None, FIELD_SCHEMA):
        raise ValueError("not a field document")
    kind = payload["kind"]
    k = int(payload["k"])
    if kind == KIND_HOPF:
        return FieldSpec.hopf(k)
    if kind == KIND_ROTATED:
        return FieldSpec.rotated_hopf(np.array(payload["Q"], dtype=float))
    if kind == KIND_PERTURBED:
        b = payload["bump"]
        bump = BumpProfile(b["rho0"], SpherePoint(b["center"]), b.get("type", BUMP_POLY))
        return FieldSpec.perturbed(k, payload["coefficients"], bump)
    raise ValueError(f"unknown field kind {kind!r}")


def save_field(spec: FieldSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_payload(spec), fh)


def load_field(path) -> FieldSpec:
    with open(path) as fh:
        return field_from_payload(json.load(fh))
