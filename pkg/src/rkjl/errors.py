"""Exception hierarchy shared by every module in the package."""


class RKJLError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RKJLError, ValueError):
    """Operand shapes do not agree."""


class ParameterError(RKJLError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DegenerateMatrixError(RKJLError, ValueError):
    """The matrix carries no usable rows (all-zero, or empty)."""


class RankDeficientError(RKJLError, ValueError):
    """The matrix is numerically rank deficient."""


class ProjectionError(RKJLError, ValueError):
    """Projection onto the hyperplane of a zero row is undefined."""


class FormatError(RKJLError, ValueError):
    """A persisted file does not follow the expected binary layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
