"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition."""


class ShapeError(ValidationError):
    """An array has the wrong dimensions; message names expected and actual."""


class ParseError(ValidationError):
    """A data file could not be parsed; carries the offending row number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class ModelFormatError(ValueError):
    """A model file is corrupt, truncated, or has an unsupported version."""
