"""Exception types raised by the solver library."""


class QMCError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(QMCError, ValueError):
    """Shapes of a matrix and an observation set disagree."""


class DomainError(QMCError, ValueError):
    """An argument lies outside the domain of an operation."""


class ParseError(QMCError, ValueError):
    """A data or matrix file is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(QMCError, ValueError):
    """Parsed data violates a dataset invariant."""


class StepSizeError(QMCError, ArithmeticError):
    """Gradient descent diverged for the configured step size."""

    def __init__(self, step_size, message=None):
        msg = message or (f"objective diverged with step size mu={step_size!r}; "
                          "try a smaller --mu")
        super().__init__(msg)
        self.step_size = step_size


class NumericalError(QMCError, ArithmeticError):
    """A linear algebra routine failed."""


class CapacityError(QMCError, ValueError):
    """Problem too large for a dense diagnostic."""


class AssumptionError(QMCError, ValueError):
    """A theoretical assumption required by a calculator does not hold."""


class SearchError(QMCError, RuntimeError):
    """A parameter search produced no admissible result."""
