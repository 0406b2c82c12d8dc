"""Finite-difference variational solver for an electrostatically coupled
scalar-field system on rectangular boxes, with a verification harness."""

from .elliptic import (
    CompatibilityError,
    EllipticOperator,
    SolverError,
    SolveStats,
    box_eigenvalue_analytic,
    box_eigenvalue_discrete,
    box_spectrum_analytic,
    cg_solve,
    check_hyp,
    eigenvalues,
    smallest_eigenvalue,
    solve_lifting_U,
    solve_phi_D,
    solve_phi_N,
)
from .functional import (
    ConfigurationError,
    FunctionalContext,
    NonlinearityModel,
    PhysicalParams,
    eval_J,
    grad_J,
)
from .grid import (
    BoundaryData,
    Domain,
    GridError,
    ScalarField,
    build_domain,
    field_from_function,
    field_from_interior,
    zeros_field,
)
from .optimize import (
    CriticalPoint,
    DescentConfig,
    MountainPassConfig,
    find_negative_endpoint,
    minimize,
    mountain_pass,
    multiplicity_probe,
    newton_refine,
)
from .reduction import (
    DegenerateOperatorError,
    ReducedState,
    solve_phi_v_dirichlet,
    solve_phi_v_neumann,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryData",
    "CompatibilityError",
    "ConfigurationError",
    "CriticalPoint",
    "DegenerateOperatorError",
    "DescentConfig",
    "Domain",
    "EllipticOperator",
    "FunctionalContext",
    "GridError",
    "MountainPassConfig",
    "NonlinearityModel",
    "PhysicalParams",
    "ReducedState",
    "ScalarField",
    "SolveStats",
    "SolverError",
    "box_eigenvalue_analytic",
    "box_eigenvalue_discrete",
    "box_spectrum_analytic",
    "build_domain",
    "cg_solve",
    "check_hyp",
    "eigenvalues",
    "eval_J",
    "field_from_function",
    "field_from_interior",
    "find_negative_endpoint",
    "grad_J",
    "minimize",
    "mountain_pass",
    "multiplicity_probe",
    "newton_refine",
    "smallest_eigenvalue",
    "solve_lifting_U",
    "solve_phi_D",
    "solve_phi_N",
    "solve_phi_v_dirichlet",
    "solve_phi_v_neumann",
    "zeros_field",
]
