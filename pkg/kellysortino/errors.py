"""Exception hierarchy.

DomainError subclasses ValueError so that plain ``except ValueError`` call
sites keep working.
"""


class KellySortinoError(Exception):
    """Root of every error raised by kellysortino."""


class DomainError(KellySortinoError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateAllocationError(DomainError):
    """theta = 0, where the downside threshold divides by zero."""


class HorizonError(DomainError):
    """The holding horizon does not fit inside the price series."""


class ConsistencyError(KellySortinoError):
    """Closed-form and direct evaluations disagree beyond tolerance."""

    def __init__(self, message: str, closed: float, direct: float):
        super().__init__(message)
        self.closed = closed
        self.direct = direct


class PriceDataError(KellySortinoError):
    """Base class for price-file ingestion failures."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class PriceParseError(PriceDataError):
    pass


class PriceOrderError(PriceDataError):
    pass


class EmptySeriesError(PriceDataError):
    pass


class InsufficientDataError(KellySortinoError):
    """Too few trades to produce a meaningful report."""
