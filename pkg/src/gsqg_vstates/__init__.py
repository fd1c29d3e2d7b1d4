"""Co-rotating nested polygonal vortex-patch states for generalized SQG."""

from .contour import (
    PatchShape,
    ResidualSpectrum,
    VState,
    curvature,
    evaluate_functional,
    jacobian_lambda,
    linearized_diag,
    patch_area,
    quadrature_tolerance,
    sample_boundary,
)
from .dynamics import CurveEnsemble, cde_velocity, ensemble_from_vstate, evolve, rotation_fit
from .equilibria import (
    ConfigParams,
    Configuration,
    Equilibrium,
    build_configuration,
    induced_velocity,
    nondegeneracy_report,
    point_vortex_residual,
    rigid_rotation_check,
    solve_equilibrium,
)
from .errors import (
    ConfigurationError,
    DegeneracyError,
    DomainError,
    GeometryError,
    GsqgError,
    MissingPrerequisiteError,
    NumericalError,
    SolverError,
    VerificationError,
)
from .solver import (
    AsymptoticReport,
    SolveOptions,
    asymptotic_report,
    continuation,
    convexity_sweep,
    geometric_ladder,
    newton_jacobian,
    solve_vstate,
)
from .specfun import (
    SpectrumTable,
    gamma_fn,
    interaction_sum,
    kernel_constants,
    polygon_sum,
    sigma_spectrum,
)

__all__ = [
    "AsymptoticReport",
    "ConfigParams",
    "Configuration",
    "ConfigurationError",
    "CurveEnsemble",
    "DegeneracyError",
    "DomainError",
    "Equilibrium",
    "GeometryError",
    "GsqgError",
    "MissingPrerequisiteError",
    "NumericalError",
    "PatchShape",
    "ResidualSpectrum",
    "SolveOptions",
    "SolverError",
    "SpectrumTable",
    "VState",
    "VerificationError",
    "asymptotic_report",
    "build_configuration",
    "cde_velocity",
    "continuation",
    "convexity_sweep",
    "curvature",
    "ensemble_from_vstate",
    "evaluate_functional",
    "evolve",
    "gamma_fn",
    "geometric_ladder",
    "induced_velocity",
    "interaction_sum",
    "jacobian_lambda",
    "kernel_constants",
    "linearized_diag",
    "newton_jacobian",
    "nondegeneracy_report",
    "patch_area",
    "point_vortex_residual",
    "polygon_sum",
    "quadrature_tolerance",
    "rigid_rotation_check",
    "rotation_fit",
    "sample_boundary",
    "sigma_spectrum",
    "solve_equilibrium",
    "solve_vstate",
]
