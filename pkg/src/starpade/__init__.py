"""High-precision Pade approximants on three-point Chebotarev star cuts."""

from .precision import PrecisionPolicy, default_digits, mpc_of
from .linalg import SingularMatrix, solve_dense
from .polys import ComplexPoly, NonConvergence, poly_roots
from .quadrature import (Contour, QuadratureError, SingularInterior,
                         ToleranceNotReached, integrate, integrate_with_error)

__version__ = "0.1.0"

__all__ = [
    "PrecisionPolicy", "default_digits", "mpc_of",
    "SingularMatrix", "solve_dense",
    "ComplexPoly", "NonConvergence", "poly_roots",
    "Contour", "QuadratureError", "SingularInterior", "ToleranceNotReached",
    "integrate", "integrate_with_error",
    "__version__",
]
