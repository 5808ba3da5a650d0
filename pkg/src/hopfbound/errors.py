"""Exception types shared across modules (kept dependency-free so both
kernel backends can raise them)."""


class NormalizationError(ValueError):
    """Unit-field evaluation failed: the unnormalized vector was shorter than
    the safety floor, which usually signals too-large perturbation
    coefficients."""


class NonDiffeomorphicError(RuntimeError):
    """The displacement map left its diffeomorphism range (nonpositive
    numeric Jacobian determinant)."""
