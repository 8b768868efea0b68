"""Exception types raised across the package."""


class PPSMError(Exception):
    """Base class for all package errors."""


class ParseError(PPSMError):
    pass


class NonManifoldError(PPSMError):
    pass


class OrientationError(PPSMError):
    pass


class DegenerateMeshError(PPSMError):
    pass


class DisconnectedMeshError(PPSMError):
    pass


class DecimationFailure(PPSMError):
    pass


class DimensionMismatch(PPSMError, ValueError):
    pass


class ZeroFeatureVector(PPSMError, ValueError):
    pass


class RangeError(PPSMError, ValueError):
    pass


class LengthMismatch(PPSMError, ValueError):
    pass


class IndexOutOfRange(PPSMError, ValueError):
    pass


class BudgetExceeded(PPSMError):
    pass


class SolverLaunchError(PPSMError):
    pass


class SolutionParseError(PPSMError):
    pass


class ValidationError(PPSMError):
    """A solver returned an assignment that violates the model."""


class InconsistentSolution(PPSMError):
    pass


class EmptyCandidateSet(PPSMError):
    pass


class DegenerateAlignment(PPSMError):
    pass


class EmptyOverlap(PPSMError):
    pass


class DegenerateCut(PPSMError):
    pass


class PipelineError(PPSMError):
    pass
