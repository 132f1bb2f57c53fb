"""
Error hierarchy for kinlim.

Every error derives from ValueError so callers that only know about
ValueError keep working; controllers use the subclasses to pick exit codes.
"""


class KinlimError(ValueError):
    """Base class for all kinlim errors."""

    exit_code = 3


class ConfigError(KinlimError):
    """Invalid, unknown or inconsistent configuration."""

    exit_code = 2


class NumericalError(KinlimError):
    """A numerical procedure failed."""

    exit_code = 3


class DegenerateStateError(NumericalError):
    """Recovered density or temperature is not positive."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class ResolutionError(NumericalError):
    """Velocity or spatial grid cannot resolve the requested state."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PreconditionError(NumericalError):
    """An operation was called on inputs violating its precondition."""


class StabilityError(NumericalError):
    """Time integration became unstable (CFL, NaN or positivity)."""

    def __init__(self, message, step=None, dump_path=None):
        super().__init__(message)
        self.step = step
        self.dump_path = dump_path


class AcceptanceError(KinlimError):
    """A verification criterion failed."""

    exit_code = 4
