"""Level set topology optimization with B-spline velocity fields.

Minimizes material volume on a structured Q4 grid subject to a p-norm stress
measure and a KS aggregate of buckling load factor reciprocals. The front
moves with a normal velocity interpolated from tensor B-spline coefficients,
which are the design variables of an MMA update driven by discrete adjoint
sensitivities projected onto the interface.
"""

from .benchmarks import benchmark_config, benchmark_names
from .bspline import (
    BsplineSurface,
    KnotVector,
    basis_functions,
    basis_matrix,
    basis_value,
    find_spans,
    knot_velocities,
    open_uniform_knots,
    surface_for_domain,
    velocity_field_from_knots,
)
from .buckling import (
    BucklingModes,
    EigenSolveError,
    InsufficientModesError,
    solve_buckling_modes,
)
from .config import (
    ConfigError,
    ProblemConfig,
    config_to_text,
    load_config,
    parse_config_text,
)
from .driver import (
    Problem,
    RunHistory,
    RunRecord,
    RunResult,
    StateAnalysis,
    analyze_state,
    build_problem,
    run_optimization,
)
from .fem import (
    MaterialModel,
    ReducedFactorization,
    SingularSystemError,
    StressState,
    assemble_stiffness,
    assemble_stress_stiffness,
    constitutive_matrix,
    element_stresses,
    geometric_templates,
    solve_equilibrium,
    stress_stiffness_quadratic,
    stress_stiffness_u_derivative,
    unit_element_stiffness,
)
from .levelset import (
    CflViolationError,
    HolePattern,
    LevelSetGrid,
    advect_upwind,
    density_from_levelset,
    gradient_norm,
    initialize_with_holes,
    reinitialize,
    smoothed_dirac,
    smoothed_heaviside,
)
from .mesh import StructuredMesh, build_mesh, lbracket_mask
from .mma import MmaState, init_mma, mma_update
from .outputs import HISTORY_HEADER, read_field_csv, write_outputs
from .sensitivity import (
    buckling_eigen_sensitivity,
    ks_aggregate,
    ks_sensitivity,
    ks_weights,
    pnorm_stress,
    pnorm_stress_sensitivity,
    project_to_coefficients,
    volume_and_sensitivity,
)

__version__ = "0.1.0"

__all__ = [
    "BsplineSurface",
    "BucklingModes",
    "CflViolationError",
    "ConfigError",
    "EigenSolveError",
    "HISTORY_HEADER",
    "HolePattern",
    "InsufficientModesError",
    "KnotVector",
    "LevelSetGrid",
    "MaterialModel",
    "MmaState",
    "Problem",
    "ProblemConfig",
    "ReducedFactorization",
    "RunHistory",
    "RunRecord",
    "RunResult",
    "SingularSystemError",
    "StateAnalysis",
    "StressState",
    "StructuredMesh",
    "advect_upwind",
    "analyze_state",
    "assemble_stiffness",
    "assemble_stress_stiffness",
    "basis_functions",
    "basis_matrix",
    "basis_value",
    "benchmark_config",
    "benchmark_names",
    "buckling_eigen_sensitivity",
    "build_mesh",
    "build_problem",
    "config_to_text",
    "constitutive_matrix",
    "density_from_levelset",
    "element_stresses",
    "find_spans",
    "geometric_templates",
    "gradient_norm",
    "initialize_with_holes",
    "knot_velocities",
    "ks_aggregate",
    "ks_sensitivity",
    "ks_weights",
    "lbracket_mask",
    "load_config",
    "mma_update",
    "init_mma",
    "open_uniform_knots",
    "parse_config_text",
    "pnorm_stress",
    "pnorm_stress_sensitivity",
    "project_to_coefficients",
    "read_field_csv",
    "reinitialize",
    "run_optimization",
    "smoothed_dirac",
    "smoothed_heaviside",
    "solve_buckling_modes",
    "solve_equilibrium",
    "stress_stiffness_quadratic",
    "stress_stiffness_u_derivative",
    "surface_for_domain",
    "unit_element_stiffness",
    "velocity_field_from_knots",
    "volume_and_sensitivity",
    "write_outputs",
]
