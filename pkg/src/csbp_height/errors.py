"""Exception hierarchy shared by every module of the package."""


class CSBPError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CSBPError, ValueError):
    """A mechanism, schedule or experiment configuration is unusable.

    ``violations`` lists machine-readable reasons (e.g. the name of the
    violated assumption) so the CLI can report them verbatim.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [message])


class NumericFailure(CSBPError, ArithmeticError):
    """A quadrature, root-finding or ODE step failed to converge."""


class DomainError(CSBPError, ValueError):
    """An argument lies outside the domain of a mathematical function."""


class InvalidInput(CSBPError, ValueError):
    """Malformed data handed to a transformation (unsorted times, NaNs...)."""


class RangeError(CSBPError, IndexError):
    """A query falls outside the simulated horizon or the available samples."""
