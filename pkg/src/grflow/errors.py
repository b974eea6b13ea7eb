"""Exception hierarchy shared across the package.

Errors split into two families used by the CLI exit-code mapping:
validation errors (bad inputs, exit 2) and numerical errors
(runs that start fine and fail midway, exit 3).
"""


class GrfError(Exception):
    """Base class for all package errors."""


class ValidationError(GrfError):
    """Input or constraint violation detectable before running."""


class NumericalError(GrfError):
    """Failure arising during a numerical computation."""


class NonInvertiblePairing(ValidationError):
    pass


class InvalidLieAlgebra(ValidationError):
    pass


class SingularBasis(ValidationError):
    pass


class DegenerateSubspace(ValidationError):
    pass


class ForbiddenRank(ValidationError):
    """Eigenspace of rank one: no Levi-Civita connection with prescribed divergence."""


class NonPositiveHalfDensity(ValidationError):
    pass


class ConfigParseError(ValidationError):
    pass


class RetractionDiverged(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class DegenerateMetric(NumericalError):
    """Metric lost positive definiteness on the grid."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class EigensolverStalled(NumericalError):
    pass
