"""Exception types raised across the package."""


class DwtnnrError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DwtnnrError, ValueError):
    """An argument lies outside the domain of an operation (shape, finiteness, bounds)."""


class ConfigError(DwtnnrError, ValueError):
    """A solver or generator configuration is invalid."""


class NumericalError(DwtnnrError, ArithmeticError):
    """A numerical routine failed, e.g. SVD non-convergence.

    ``iteration`` is set when the failure happened inside a solver loop.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ParseError(DwtnnrError, ValueError):
    """Malformed netpbm input. ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class OracleInapplicableError(DwtnnrError, ValueError):
    """The rank-1 oracle cannot be applied to the given observation pattern."""
