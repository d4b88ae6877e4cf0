"""Numerical solver and property checks for Hessian-quotient equations of
P-eigenvalues on the sphere."""

from .lambda_op import OperatorMode, f_grad, f_value, in_pk_cone, pk_margin
from .problem import ProblemSpec
from .sphere import SolutionField, SphereGrid, make_grid, spectrum_field
from .symfunc import ConeError, in_gamma, quotient, sigma

__version__ = "0.1.0"

__all__ = [
    "ConeError",
    "OperatorMode",
    "ProblemSpec",
    "SolutionField",
    "SphereGrid",
    "f_grad",
    "f_value",
    "in_gamma",
    "in_pk_cone",
    "make_grid",
    "pk_margin",
    "quotient",
    "sigma",
    "spectrum_field",
]
