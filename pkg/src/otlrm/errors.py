"""Exception types raised across the toolkit."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class DegenerateParameterError(ValueError):
    """A reflection vector is (numerically) zero."""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


class NumericError(ArithmeticError):
    """Non-finite values or a numerical routine failed to converge."""


class UnsupportedOpError(TypeError):
    """An operation outside the differentiable vocabulary was applied to a graph node."""


class FormatError(ValueError):
    """A tensor container file is malformed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IngestionError(ValueError):
    """An imported array file uses an unsupported feature."""
