"""hopfbound: energy of unit vector fields on spherical caps of odd spheres.

Computes energies and shape-matrix symmetric functions of Hopf and
perturbed unit fields, verifies the displacement-map volume identities and
the supporting matrix inequality chain, and probes the solenoidal energy
lower bound with a penalized optimizer. Hot kernels run in a compiled
extension when available, with a vectorized numpy fallback selected at
import (HOPFBOUND_PURE_PYTHON=1 forces the fallback).
"""

__version__ = "0.1.0"

from ._backend import backend_name, have_compiled
from .errors import NonDiffeomorphicError, NormalizationError
from .fields import BumpProfile, FieldSpec, boundary_mismatch, eval_field, eval_hopf
from .shape import (EnergyReport, ShapeMatrix, SymmetricFunctions,
                    covariant_derivative, divergence, energy, energy_density,
                    energy_lower_bound, hopf_symmetric_values, shape_matrix,
                    symmetric_functions)
from .sphere import (AdaptedFrame, DomainSpec, QuadratureRule, SpherePoint,
                     TangentVector, adapted_frame, apply_complex_structure,
                     build_quadrature, complex_structure, project_tangent)
from .transport import (TransportReport, displaced_field, displacement,
                        jacobian_det_closed_form, jacobian_det_numeric,
                        moment_identities, volume_transport)

__all__ = [
    "__version__", "backend_name", "have_compiled",
    "NonDiffeomorphicError", "NormalizationError",
    "BumpProfile", "FieldSpec", "boundary_mismatch", "eval_field", "eval_hopf",
    "EnergyReport", "ShapeMatrix", "SymmetricFunctions", "covariant_derivative",
    "divergence", "energy", "energy_density", "energy_lower_bound",
    "hopf_symmetric_values", "shape_matrix", "symmetric_functions",
    "AdaptedFrame", "DomainSpec", "QuadratureRule", "SpherePoint",
    "TangentVector", "adapted_frame", "apply_complex_structure",
    "build_quadrature", "complex_structure", "project_tangent",
    "TransportReport", "displaced_field", "displacement",
    "jacobian_det_closed_form", "jacobian_det_numeric", "moment_identities",
    "volume_transport",
]
