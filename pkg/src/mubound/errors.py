"""Exception types shared across the solver."""


class MuSolverError(Exception):
    """Base class for all solver failures."""


class StructureError(MuSolverError, ValueError):
    """Malformed structure description or mismatched dimensions."""


class EigenSolverError(MuSolverError):
    """The dense eigensolver failed to converge."""


class NonSimpleTarget(MuSolverError):
    """The target eigenvalue is too close to the rest of the spectrum."""


class DegeneratePair(MuSolverError):
    """Left/right eigenvector pair with vanishing inner product."""


class SigmaUnderflow(MuSolverError):
    """Rank-one core too small for the factored dynamics; use the dense flow."""

    def __init__(self, block_index: int, magnitude: float):
        super().__init__(
            f"rank-one core of block {block_index} has modulus {magnitude:.3e}"
        )
        self.block_index = block_index
        self.magnitude = magnitude


class StepUnderflow(MuSolverError):
    """Step size fell below its minimum; the flow is considered stationary."""


class AssumptionViolated(MuSolverError):
    """A block inner product required by a derivative formula vanished."""


class TooManyParameters(MuSolverError, ValueError):
    """Structure has too many free parameters for an exhaustive grid."""
