"""Identifiability of structural VARs with a singular innovation covariance."""

from .errors import SvarError
from .identify import (
    check_compatibility,
    check_local_identifiability,
    check_system_restrictions,
    genericity_trial,
)
from .matrixcore import Tol
from .model import SvarModel, compile_restrictions, is_stable, sigma_u
from .moments import (
    CovarianceSequence,
    autocovariances,
    build_toeplitz,
    detect_structure,
    sample_autocovariances,
    simulate,
)
from .refixtures import golden_suite, solve_canonical
from .yulewalker import min_norm_solution, pivot_solution, solution_set

__all__ = [
    "CovarianceSequence", "SvarError", "SvarModel", "Tol", "autocovariances", "build_toeplitz",
    "check_compatibility", "check_local_identifiability", "check_system_restrictions",
    "compile_restrictions", "detect_structure", "genericity_trial", "golden_suite", "is_stable",
    "min_norm_solution", "pivot_solution", "sample_autocovariances", "sigma_u", "simulate",
    "solution_set", "solve_canonical",
]
