"""Exception hierarchy shared by all modules."""


class RalError(Exception):
    """Base class for library errors."""


class DimensionError(RalError, ValueError):
    """Shapes or dimensions are incompatible."""


class EmptySpanError(RalError, ValueError):
    """All input vectors are numerically zero."""


class MembershipError(RalError, ValueError):
    """A vector does not lie in the given subspace."""


class PreconditionError(RalError, ValueError):
    """An operation was called outside its domain of validity."""


class DegeneracyError(PreconditionError):
    """An eigenvalue formula was requested at a degenerate eigenvalue."""


class InvalidChannelError(RalError, ValueError):
    """Kraus operators do not define a trace-preserving map."""


class UnsupportedCaseError(RalError):
    """The requested configuration is not covered by the theory."""


class ConvergenceError(RalError, RuntimeError):
    """The optimizer failed to reach the requested tolerance."""

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual
