"""Exception hierarchy shared across the toolkit.

Everything raised deliberately by this package derives from PcevalError.
Contract violations on inputs are ValidationError subclasses; the CLI maps
those to exit code 1 and file-level problems (OSError, FormatError) to 2.
"""


class PcevalError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PcevalError, ValueError):
    """An input violates an operation's documented preconditions."""


class EmptyInputError(ValidationError):
    """An operation that requires data received an empty set."""


class DegenerateMeshError(ValidationError):
    """Mesh has no faces or zero total surface area."""


class UnequalCardinalityError(ValidationError):
    """A matching-based distance was asked to pair sets of different sizes."""


class GridMismatchError(ValidationError):
    """Two voxel structures do not share the same grid specification."""


class InsufficientDataError(ValidationError):
    """Fewer data rows than the model requires (e.g. points < components)."""


class ProtocolViolationError(ValidationError):
    """Inputs do not satisfy the evaluation protocol's shape requirements."""


class UndefinedIouError(ValidationError):
    """IoU requested for two grids whose union is empty."""


class FormatError(PcevalError):
    """A file exists but its contents do not match the declared format."""


class ApproximationFailureError(PcevalError):
    """An approximate solver exhausted its budget before certifying its answer.

    Carries the best primal value found and the best proven lower bound so
    callers can still inspect how close the run got.
    """

    def __init__(self, message: str, best_value: float, lower_bound: float):
        super().__init__(message)
        self.best_value = float(best_value)
        self.lower_bound = float(lower_bound)


class DegenerateFitError(PcevalError):
    """Model fitting collapsed (e.g. a covariance lost positive definiteness).

    `component` names the mixture component that went bad, or -1 if the
    failure is not attributable to a single component.
    """

    def __init__(self, message: str, component: int = -1):
        super().__init__(message)
        self.component = int(component)


class DecoderFailureError(PcevalError):
    """An external decoder process failed; diagnostics holds captured output."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics
