"""Lower bounds for structured singular values.

The package computes lower bounds of the structured singular value of a
complex square matrix under block-diagonal perturbations mixing repeated
real/complex scalar blocks and full complex blocks.  An inner gradient
flow drives perturbations to local extremizers of structured spectral
value sets at a fixed level; an outer Newton/bisection iteration
adjusts the level until the singularity is reached.  Every bound comes
with a machine-checkable destabilizing-perturbation certificate.
"""

__version__ = "0.1.0"

from .blocks import (
    BlockKind,
    BlockSpec,
    BlockStructure,
    Perturbation,
    RankOne,
    assemble_dense,
    parse_structure,
    project_onto_structure,
    random_unit_perturbation,
    renormalize,
)
from .eig import EigenTriple, eig_all, eig_derivative, target_closest_to_one, target_largest
from .errors import (
    AssumptionViolated,
    DegeneratePair,
    EigenSolverError,
    MuSolverError,
    NonSimpleTarget,
    SigmaUnderflow,
    StepUnderflow,
    StructureError,
    TooManyParameters,
)
from .flow import (
    FlowOptions,
    FlowState,
    GradientDirection,
    euler_step,
    gradient_complex,
    gradient_mixed,
    integrate_to_stationary,
    rank_one_rhs,
)
from .oracle import (
    VerificationReport,
    fd_check_derivative,
    grid_mu_tiny,
    sample_lower_bound,
    verify_certificate,
)
from .outer import (
    Certificate,
    OuterConfig,
    OuterIterate,
    compute_lower_bound,
    derivative_complex,
    derivative_mixed,
    initial_epsilon,
    initial_perturbation,
    newton_update,
)

__all__ = [
    "AssumptionViolated",
    "BlockKind",
    "BlockSpec",
    "BlockStructure",
    "Certificate",
    "DegeneratePair",
    "EigenSolverError",
    "EigenTriple",
    "FlowOptions",
    "FlowState",
    "GradientDirection",
    "MuSolverError",
    "NonSimpleTarget",
    "OuterConfig",
    "OuterIterate",
    "Perturbation",
    "RankOne",
    "SigmaUnderflow",
    "StepUnderflow",
    "StructureError",
    "TooManyParameters",
    "VerificationReport",
    "assemble_dense",
    "compute_lower_bound",
    "derivative_complex",
    "derivative_mixed",
    "eig_all",
    "eig_derivative",
    "euler_step",
    "fd_check_derivative",
    "gradient_complex",
    "gradient_mixed",
    "grid_mu_tiny",
    "initial_epsilon",
    "initial_perturbation",
    "integrate_to_stationary",
    "newton_update",
    "parse_structure",
    "project_onto_structure",
    "random_unit_perturbation",
    "rank_one_rhs",
    "renormalize",
    "sample_lower_bound",
    "target_closest_to_one",
    "target_largest",
    "verify_certificate",
]
