"""Exception types shared across the toolkit.

The CLI maps these onto distinct exit codes (see ``cli.py``): usage errors,
data/format errors, and numeric failures are kept apart so batch scripts can
tell them apart without parsing messages.
"""


class DimensionError(ValueError):
    """Tensor/array shapes are inconsistent for the requested operation."""


class UsageError(ValueError):
    """The caller violated an API contract (bad arguments, missing grads)."""


class RoutingError(UsageError):
    """An agent category has no decoder to route to."""


class DataError(ValueError):
    """Input data violates a documented invariant."""


class ParseError(DataError):
    """A raw trajectory table could not be parsed."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class FormatError(DataError):
    """A serialized artifact (canonical samples, checkpoint) is malformed
    or carries an unsupported version."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
