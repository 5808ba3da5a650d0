"""Points, tangent vectors, the complex structure, geodesic-cap domains,
and quadrature rules over them.

The ambient space is R^(2k+2); sphere points are unit rows. Geodesic caps
are parameterized in polar coordinates about their center: a node at radius
rho in direction d (a unit vector of the tangent space at the center) is
cos(rho) * center + sin(rho) * d, and the volume element carries the
sin(rho)^(2k) radial density.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._backend import get_backend
from ._kernels_py import FRAME_DROP_THRESHOLD

POINT_NORM_TOL = 1e-12
TANGENT_TOL = 1e-10
QUADRATURE_SCHEMA = "hopfbound/quadrature"
QUADRATURE_VERSION = 1


def ambient_dim(k: int) -> int:
    return 2 * k + 2


def k_from_ambient(n: int) -> int:
    if n < 4 or n % 2:
        raise ValueError(f"ambient dimension must be even and >= 4, got {n}")
    return n // 2 - 1


def _as_vector(coords) -> np.ndarray:
    v = np.array(coords, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-D coordinate vector")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class SpherePoint:
    """Unit vector in ambient (2k+2)-space."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_vector(self.coords))
        k_from_ambient(self.coords.shape[0])
        if abs(np.linalg.norm(self.coords) - 1.0) > POINT_NORM_TOL:
            raise ValueError("point is not on the unit sphere (|norm - 1| > 1e-12)")

    @property
    def k(self) -> int:
        return k_from_ambient(self.coords.shape[0])

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class TangentVector:
    """Ambient vector attached to a base point and orthogonal to it."""

    base: SpherePoint
    vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vec", _as_vector(self.vec))
        if self.vec.shape != self.base.coords.shape:
            raise ValueError("tangent vector and base point dimensions differ")
        if abs(float(self.vec @ self.base.coords)) > TANGENT_TOL:
            raise ValueError("vector is not tangent at its base point")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))


def project_tangent(x: SpherePoint, w) -> TangentVector:
    """Tangential part of an ambient vector at x: w - <w, x> x. Idempotent."""
    w = np.asarray(w, dtype=float)
    return TangentVector(x, w - (w @ x.coords) * x.coords)


def complex_structure(k: int) -> np.ndarray:
    """Matrix of multiplication by i under the pairing (x1, x2), (x3, x4), ...

    Satisfies J^2 = -Id, J orthogonal, <Jw, w> = 0; the Hopf field is x -> Jx.
    """
    n = ambient_dim(k)
    J = np.zeros((n, n))
    for a in range(0, n, 2):
        J[a, a + 1] = -1.0
        J[a + 1, a] = 1.0
    return J


def apply_complex_structure(w, k: int | None = None) -> np.ndarray:
    """(w1, w2, w3, w4, ...) -> (-w2, w1, -w4, w3, ...)."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.shape[0] % 2:
        raise ValueError("input must be a 1-D vector of even length")
    if k is not None and w.shape[0] != ambient_dim(k):
        raise ValueError(f"expected length {ambient_dim(k)} for k={k}, got {w.shape[0]}")
    out = np.empty_like(w)
    out[0::2] = -w[1::2]
    out[1::2] = w[0::2]
    return out


def random_point(k: int, rng: np.random.Generator) -> SpherePoint:
    v = rng.standard_normal(ambient_dim(k))
    return SpherePoint(v / np.linalg.norm(v))


def random_points(k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, 2k+2) array of uniform sphere points."""
    X = rng.standard_normal((count, ambient_dim(k)))
    return X / np.linalg.norm(X, axis=1)[:, None]


def random_tangent(x: SpherePoint, rng: np.random.Generator, unit=True) -> TangentVector:
    w = rng.standard_normal(x.n)
    w -= (w @ x.coords) * x.coords
    if unit:
        w /= np.linalg.norm(w)
    return TangentVector(x, w)


@dataclass(frozen=True)
class DomainSpec:
    """Full sphere, or the geodesic cap of radius ``radius`` about ``center``."""

    kind: str  # "full" | "cap"
    k: int
    center: SpherePoint | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.kind == "full":
            if self.center is not None or self.radius is not None:
                raise ValueError("full-sphere domain takes no center or radius")
        elif self.kind == "cap":
            if self.center is None or self.radius is None:
                raise ValueError("cap domain needs a center and a radius")
            if self.center.k != self.k:
                raise ValueError("cap center dimension does not match k")
            if not 0.0 < self.radius <= math.pi:
                raise ValueError("cap radius must satisfy 0 < radius <= pi")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @staticmethod
    def full_sphere(k: int) -> "DomainSpec":
        return DomainSpec("full", k)

    @staticmethod
    def cap(center: SpherePoint, radius: float) -> "DomainSpec":
        return DomainSpec("cap", center.k, center, float(radius))

    def label(self) -> str:
        return "full" if self.kind == "full" else f"cap:rho={self.radius:g}"

    def polar_center(self) -> SpherePoint:
        if self.center is not None:
            return self.center
        return canonical_center(self.k)

    def polar_radius(self) -> float:
        return math.pi if self.kind == "full" else float(self.radius)

    def to_payload(self) -> dict:
        out = {"kind": self.kind, "k": self.k}
        if self.kind == "cap":
            out["center"] = self.center.coords.tolist()
            out["radius"] = self.radius
        return out

    @staticmethod
    def from_payload(payload: dict) -> "DomainSpec":
        if payload["kind"] == "full":
            return DomainSpec.full_sphere(int(payload["k"]))
        return DomainSpec.cap(SpherePoint(payload["center"]), payload["radius"])


def canonical_center(k: int) -> SpherePoint:
    e = np.zeros(ambient_dim(k))
    e[0] = 1.0
    return SpherePoint(e)


class QuadratureRule:
    """Nodes, positive volume weights, and boundary nodes for a domain.

    Node ordering is radial-major over the direction grid; weight sums
    converge to vol(K) as the resolution grows.
    """

    def __init__(self, k, domain, nodes, weights, boundary_nodes,
                 radial_points=None, angular_points=None):
        self.k = int(k)
        self.domain = domain
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        self.boundary_nodes = np.ascontiguousarray(boundary_nodes, dtype=float)
        self.radial_points = radial_points
        self.angular_points = angular_points
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("node and weight counts differ")
        if np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")
        for arr in (self.nodes, self.weights, self.boundary_nodes):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @cached_property
    def volume(self) -> float:
        return math.fsum(self.weights.tolist())

    def resolution_payload(self) -> dict:
        return {"radial": self.radial_points, "angular": self.angular_points,
                "nodes": self.n_nodes}


def default_resolution(k: int) -> tuple[int, int]:
    if k == 1:
        return 64, 32
    if k == 2:
        return 16, 8
    return 8, 4


def _gauss_legendre(n: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _direction_grid(m: int, n_theta: int, n_phi: int):
    """Product quadrature on the unit m-sphere of directions (m >= 2).

    Polar angles get Gauss-Legendre nodes on [0, pi] with the sin-power
    densities folded into the weights; the azimuth gets the trapezoidal rule,
    which is spectrally accurate for periodic integrands.
    """
    axes, wts = [], []
    for j in range(1, m):
        th, w = _gauss_legendre(n_theta, 0.0, math.pi)
        axes.append(th)
        wts.append(w * np.sin(th) ** (m - j))
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    axes.append(phi)
    wts.append(np.full(n_phi, 2.0 * math.pi / n_phi))

    grids = np.meshgrid(*axes, indexing="ij")
    weight = wts[0]
    for w in wts[1:]:
        weight = np.multiply.outer(weight, w)
    weight = weight.reshape(-1)

    flat = [g.reshape(-1) for g in grids]
    count = flat[0].shape[0]
    dirs = np.empty((count, m + 1))
    sin_running = np.ones(count)
    for j in range(m - 1):
        dirs[:, j] = sin_running * np.cos(flat[j])
        sin_running = sin_running * np.sin(flat[j])
    dirs[:, m - 1] = sin_running * np.cos(flat[m - 1])
    dirs[:, m] = sin_running * np.sin(flat[m - 1])
    return dirs, weight


def _complete_basis(center: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to ``center``.

    Same candidate policy as adapted frames: ambient basis vectors sorted by
    decreasing residual norm (stable), Gram-Schmidt with re-orthogonalization.
    """
    n = center.shape[0]
    R = np.eye(n) - np.outer(center, center)
    order = np.argsort(-np.linalg.norm(R, axis=1), kind="stable")
    legs = []
    for c in order:
        r = R[c].copy()
        for _ in range(2):
            r -= (r @ center) * center
            for leg in legs:
                r -= (r @ leg) * leg
        nr = np.linalg.norm(r)
        if nr > FRAME_DROP_THRESHOLD:
            legs.append(r / nr)
        if len(legs) == n - 1:
            break
    return np.array(legs)


def build_quadrature(domain: DomainSpec, radial_points: int | None = None,
                     angular_points: int | None = None) -> QuadratureRule:
    """Geodesic polar rule about the cap center (the full sphere is the
    radius-pi cap about a canonical center, with no boundary nodes)."""
    k = domain.k
    nr_default, na_default = default_resolution(k)
    nr = int(radial_points) if radial_points is not None else nr_default
    na = int(angular_points) if angular_points is not None else na_default
    if nr < 2 or na < 2:
        raise ValueError("resolution parameters must be >= 2")

    center = domain.polar_center().coords
    rho0 = domain.polar_radius()
    m = 2 * k
    rho, w_rho = _gauss_legendre(nr, 0.0, rho0)
    w_rho = w_rho * np.sin(rho) ** m

    dirs, w_dir = _direction_grid(m, na, 2 * na)
    basis = _complete_basis(center)
    ambient_dirs = dirs @ basis  # (n_dir, n)

    nodes = (np.cos(rho)[:, None, None] * center
             + np.sin(rho)[:, None, None] * ambient_dirs[None, :, :])
    nodes = nodes.reshape(-1, center.shape[0])
    weights = np.multiply.outer(w_rho, w_dir).reshape(-1)

    if domain.kind == "cap":
        boundary = math.cos(rho0) * center + math.sin(rho0) * ambient_dirs
    else:
        boundary = np.empty((0, center.shape[0]))

    return QuadratureRule(k, domain, nodes, weights, boundary,
                          radial_points=nr, angular_points=na)


@dataclass(frozen=True)
class AdaptedFrame:
    """Orthonormal tangent frame at ``base`` whose last leg is the field value."""

    base: SpherePoint
    legs: np.ndarray  # (2k, n), rows orthonormal and tangent
    v: TangentVector

    def __post_init__(self):
        object.__setattr__(self, "legs", np.ascontiguousarray(self.legs, dtype=float))
        self.legs.flags.writeable = False

    def gram_deviation(self) -> float:
        """Max deviation of all pairwise inner products (legs, v, base) from
        the identity pattern."""
        stack = np.vstack([self.legs, self.v.vec, self.base.coords])
        g = stack @ stack.T
        return float(np.max(np.abs(g - np.eye(stack.shape[0]))))


def adapted_frame(x: SpherePoint, v: TangentVector,
                  candidate_order=None) -> AdaptedFrame:
    """Complete {x, v} to an adapted orthonormal frame.

    ``candidate_order`` overrides the default residual-sorted candidate
    policy with an explicit permutation of the ambient basis (test hook;
    symmetric functions of the shape matrix must not depend on it).
    """
    if abs(v.norm - 1.0) > 1e-8:
        raise ValueError("field value must be a unit vector")
    if candidate_order is None:
        E = get_backend().frames(x.coords[None, :], v.vec[None, :])[0]
        return AdaptedFrame(x, E, v)

    n = x.n
    legs = []
    xc, vc = x.coords, v.vec
    for c in candidate_order:
        r = np.zeros(n)
        r[c] = 1.0
        for _ in range(2):
            r -= (r @ xc) * xc
            r -= (r @ vc) * vc
            for leg in legs:
                r -= (r @ leg) * leg
        nr = np.linalg.norm(r)
        if nr > FRAME_DROP_THRESHOLD:
            legs.append(r / nr)
        if len(legs) == n - 2:
            break
    if len(legs) < n - 2:
        raise ValueError("candidate order did not yield enough frame legs")
    return AdaptedFrame(x, np.array(legs), v)


def rule_to_payload(rule: QuadratureRule) -> dict:
    return {
        "schema": QUADRATURE_SCHEMA,
        "version": QUADRATURE_VERSION,
        "k": rule.k,
        "domain": rule.domain.to_payload(),
        "resolution": {"radial": rule.radial_points, "angular": rule.angular_points},
        "nodes": rule.nodes.tolist(),
        "weights": rule.weights.tolist(),
        "boundary_nodes": rule.boundary_nodes.tolist(),
    }


def rule_from_payload(payload: dict) -> QuadratureRule:
    if payload.get("schema") != QUADRATURE_SCHEMA:
        raise ValueError("not a quadrature rule document")
    if payload.get("version") != QUADRATURE_VERSION:
        raise ValueError(f"unsupported quadrature version {payload.get('version')}")
    res = payload.get("resolution", {})
    boundary = payload["boundary_nodes"]
    n = ambient_dim(int(payload["k"]))
    return QuadratureRule(
        payload["k"],
        DomainSpec.from_payload(payload["domain"]),
        np.array(payload["nodes"], dtype=float).reshape(-1, n),
        np.array(payload["weights"], dtype=float),
        np.array(boundary, dtype=float).reshape(-1, n),
        radial_points=res.get("radial"),
        angular_points=res.get("angular"),
    )


def save_rule(rule: QuadratureRule, path) -> None:
    with open(path, "w") as fh:
        json.dump(rule_to_payload(rule), fh)


def load_rule(path) -> QuadratureRule:
    with open(path) as fh:
        return rule_from_payload(json.load(fh))
