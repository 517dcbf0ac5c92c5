"""Exception types raised across cenlab."""


class CenlabError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(CenlabError, ValueError):
    """Invalid sizes, counts, or option values."""


class ShapeError(CenlabError, ValueError):
    """Array dimensions do not line up."""

    def __init__(self, what, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class CacheMismatchError(CenlabError, RuntimeError):
    """A forward cache was handed to a network it was not produced by."""


class IdxFormatError(CenlabError, ValueError):
    """An IDX file carries the wrong magic number or a malformed header."""


class DataConsistencyError(CenlabError, ValueError):
    """Two inputs that should agree (e.g. image and label counts) do not."""


class TruncatedFileError(CenlabError, OSError):
    """An IDX file ended before its header said it would."""


class NumericDivergenceError(CenlabError, ArithmeticError):
    """A loss became NaN or infinite during training."""

    def __init__(self, epoch, batch, errors):
        self.epoch = epoch
        self.batch = batch
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch}: {errors}"
        )


class OrderingError(CenlabError, ValueError):
    """A RunLog row would break the log's monotonicity invariants."""


class ComparisonError(CenlabError, ValueError):
    """Two run logs cannot be compared checkpoint by checkpoint."""
