"""Exception hierarchy shared by all mpimex modules."""


class MpimexError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(MpimexError, ValueError):
    """A caller broke a documented precondition."""


class SingularMatrixError(MpimexError, ArithmeticError):
    """A pivot fell below the singularity threshold during a factorization."""


class NumericFailure(MpimexError, ArithmeticError):
    """An iteration failed to converge or produced non-finite values."""


class SingularParameterError(MpimexError, ZeroDivisionError):
    """A closed-form expression was evaluated at one of its poles."""


class StateValidityError(MpimexError, ValueError):
    """A physical state is outside its admissible set (e.g. negative density)."""


class MeshTanglingError(StateValidityError):
    """A mesh map lost monotonicity (non-positive cell Jacobian)."""


class NewtonFailure(NumericFailure):
    """Newton iteration on a stage equation did not converge.

    Attributes
    ----------
    subsystem, stage : int or None
        Location of the failed solve (0-based), when known.
    residual : float
        Last residual norm.
    iterations : int
        Iterations performed before giving up.
    """

    def __init__(self, message, *, subsystem=None, stage=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.subsystem = subsystem
        self.stage = stage
        self.residual = residual
        self.iterations = iterations


class StepFailure(MpimexError):
    """A time step could not be completed."""

    def __init__(self, message, *, step=None, cause=None):
        super().__init__(message)
        self.step = step
        self.cause = cause
