"""Exception hierarchy shared by all closurekit modules."""


class ClosureKitError(Exception):
    """Base class for every error raised by closurekit."""


class DimensionError(ClosureKitError, ValueError):
    """Raised when matrix or vector shapes are inconsistent."""


class NonFiniteError(ClosureKitError, ValueError):
    """Raised when an input contains NaN or Inf entries."""


class ConvergenceError(ClosureKitError, RuntimeError):
    """Raised when a LAPACK driver reports non-convergence."""


class HypothesisError(ClosureKitError):
    """Raised when an input violates a structural hypothesis.

    Examples are a non-coercive closure operator, a violated skew pairing
    or a boundary matrix that is not of full rank. All arguments are
    well-formed, but the mathematics the caller asked for does not apply.
    """


class SingularStepError(ClosureKitError, RuntimeError):
    """Raised when an implicit time step matrix is singular."""
