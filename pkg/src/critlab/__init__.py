"""critlab: a numerical laboratory for critical-exponent minimization.

Discretizes the weighted energy ``int p |grad u|^2 - lam int u^2`` on balls
and boxes, with fixed boundary data and the critical Sobolev constraint
``||u||_q = 1``, and checks the analytic predictions that govern it:
closed-form profile constants, small-scale energy expansions, multiplier
signs, and first-order energy gap bounds.
"""

from .bubbles import (
    BubbleConstants,
    BubbleParams,
    ExpansionFit,
    analytic_constants,
    bubble_energy,
    bubble_l2,
    bubble_lq_mass,
    bubble_profile,
    concentration_cross_term,
    fit_expansion,
    profile_integral,
    smooth_cutoff,
    sobolev_constant,
    superposition_root,
    truncated_bubble,
)
from .elliptic import (
    EigenResult,
    StiffnessSystem,
    assemble,
    critical_exponent,
    first_eigenpair,
    lq_norm,
    solve_auxiliary,
)
from .errors import (
    CritlabError,
    DimensionMismatchError,
    GeometryError,
    IndeterminateMultiplierError,
    InvalidFieldError,
    ModeError,
    NonpositiveRemainderError,
    OutOfDomainError,
    PreconditionError,
    ResolutionWarning,
    SolverFailureError,
    StagnationError,
    ValidationError,
    WrongRegimeError,
)
from .grid import (
    Field,
    RadialGrid,
    TensorGrid,
    h1_seminorm_weighted,
    integrate,
    unit_sphere_area,
)
from .inequalities import (
    RemainderProbe,
    check_quartic_bound,
    expansion_gap,
    remainder_ratio,
)
from .variational import (
    MinimizeConfig,
    RunReport,
    concentration_metrics,
    estimate_multiplier,
    f_of_t,
    first_order_gap,
    lift_to_sphere,
    minimize,
    segment_lq_mass,
)
from .weights import (
    BoundarySpec,
    WeightReport,
    WeightSpec,
    boundary_values,
    eval_weight,
    face_weight_values,
    lift_boundary,
    node_weight_values,
    validate_weight,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # grid
    "Field", "RadialGrid", "TensorGrid", "h1_seminorm_weighted",
    "integrate", "unit_sphere_area",
    # weights
    "BoundarySpec", "WeightReport", "WeightSpec", "boundary_values",
    "eval_weight", "face_weight_values", "lift_boundary",
    "node_weight_values", "validate_weight",
    # elliptic
    "EigenResult", "StiffnessSystem", "assemble", "critical_exponent",
    "first_eigenpair", "lq_norm", "solve_auxiliary",
    # bubbles
    "BubbleConstants", "BubbleParams", "ExpansionFit", "analytic_constants",
    "bubble_energy", "bubble_l2", "bubble_lq_mass", "bubble_profile",
    "concentration_cross_term", "fit_expansion", "profile_integral",
    "smooth_cutoff", "sobolev_constant", "superposition_root",
    "truncated_bubble",
    # variational
    "MinimizeConfig", "RunReport", "concentration_metrics",
    "estimate_multiplier", "f_of_t", "first_order_gap", "lift_to_sphere",
    "minimize", "segment_lq_mass",
    # inequalities
    "RemainderProbe", "check_quartic_bound", "expansion_gap",
    "remainder_ratio",
    # errors
    "CritlabError", "DimensionMismatchError", "GeometryError",
    "IndeterminateMultiplierError", "InvalidFieldError", "ModeError",
    "NonpositiveRemainderError", "OutOfDomainError", "PreconditionError",
    "ResolutionWarning", "SolverFailureError", "StagnationError",
    "ValidationError", "WrongRegimeError",
]
