"""Exception hierarchy shared across the package."""


class PpciError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(PpciError):
    """A CSV file is missing required columns."""


class CsvParseError(PpciError):
    """A CSV cell failed to parse; carries the offending row and column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigurationError(PpciError):
    """Inconsistent or invalid arguments (lengths, flags, ranges)."""


class NumericalError(PpciError):
    """A linear solve or factorization failed."""


class DegenerateLabelsError(PpciError):
    """Logistic fit requested with all-0 or all-1 labels."""


class CrossFitDegenerateError(PpciError):
    """A cross-fit fold complement lacks treated or control samples."""


class OverlapViolationError(PpciError):
    """A propensity outside (0, 1) reached a score computation."""


class BoundViolationError(PpciError):
    """An observed rectifier term falls outside its declared bound."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
