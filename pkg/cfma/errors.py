"""Exception hierarchy shared by the numerical modules."""


class CfmaError(Exception):
    """Base class for failures raised by the cfma library."""

    pass


class NotPSDError(CfmaError):
    """Raised when a matrix expected to be positive semi-definite is not."""

    pass


class NoConvergenceError(CfmaError):
    """Raised when an iterative routine hits its iteration cap."""

    pass


class DegenerateInputError(CfmaError):
    """Raised when an input carries no usable information (e.g. a zero polynomial)."""

    pass


class InfeasibleRatesError(CfmaError):
    """Raised when a rate required by the serial scheme is negative."""

    pass


class InapplicableError(CfmaError):
    """Raised when a special-case checker's hypothesis does not hold."""

    pass


class DegeneratePowerSplitError(CfmaError):
    """Raised when a diagonal channel splits into two independent point-to-point links."""

    pass


class RankMismatchError(CfmaError):
    """Raised when inactive precoder columns still carry signal."""

    pass


class SingularProjectionError(CfmaError):
    """Raised when previously decoded combinations span a degenerate subspace."""

    pass


class SearchSpaceTooLargeError(CfmaError):
    """Raised when an integer enumeration exceeds its combinatorial guard."""

    pass


class ConfigValidationError(CfmaError):
    """Raised when a sweep configuration fails validation."""

    pass


class EmitError(CfmaError):
    """Raised when a result artifact cannot be written."""

    pass
