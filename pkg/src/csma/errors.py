"""Exception types shared across the package.

The CLI maps each class to a documented exit code (see cli.EXIT_CODES).
"""


class CsmaError(Exception):
    """Base class for every error this package raises deliberately."""


class ShapeError(CsmaError):
    """Operand or model/data dimensions do not line up."""


class ParameterError(CsmaError):
    """A parameter value is outside its documented domain."""


class FormatError(CsmaError):
    """A file does not follow its declared binary or text format."""


class ConsistencyError(CsmaError):
    """Two inputs that must agree (counts, lengths) do not."""


class ValidationError(CsmaError):
    """Data values fall outside the allowed range."""


class EmptyInputError(CsmaError):
    """An operation that needs at least one row received none."""


class EmptyClassError(EmptyInputError):
    """A per-class computation received no samples for one class."""


class DegenerateLabelsError(CsmaError):
    """Both classes are required but the labels contain only one."""


class InsufficientDataError(CsmaError):
    """Too few samples to honor the requested split."""


class MissingShapeError(CsmaError):
    """An image-level operation needs an image shape the dataset lacks."""


class UndefinedRateError(CsmaError):
    """A rate whose denominator would be zero."""


class DivergenceError(CsmaError):
    """Training loss went non-finite or exploded; carries the epoch index."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch
