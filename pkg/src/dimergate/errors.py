"""Exception hierarchy shared by the library and the command line."""


class DimerGateError(Exception):
    """Base class for all library errors."""


class PreconditionError(DimerGateError, ValueError):
    """An input violates the documented precondition of an operation."""


class NumericalError(DimerGateError, RuntimeError):
    """A numerical procedure failed (non-convergence, lost track, ...)."""


class TrackingError(NumericalError):
    """Adiabatic eigenstate continuation became ambiguous."""


class ConfigError(DimerGateError):
    """A run configuration file is malformed or incomplete."""
