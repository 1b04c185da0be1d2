"""Exception hierarchy.

Every error carries a category used by the CLI to pick an exit code:
``data`` errors exit with 2, ``numerical`` failures with 3.
"""
from __future__ import annotations


class FrmError(Exception):
    category = "data"

    def to_dict(self) -> dict:
        payload = {"error": type(self).__name__, "message": str(self)}
        for key, value in vars(self).items():
            if not key.startswith("_") and isinstance(value, (str, int, float)):
                payload[key] = value
        return payload


class DataError(FrmError):
    category = "data"


class NumericalError(FrmError):
    category = "numerical"


# -- ingestion --------------------------------------------------------------


class CsvRowError(DataError):
    def __init__(self, message: str, row: int, column: str, path: str = ""):
        super().__init__(f"{message} (row {row}, column {column!r}{', ' + path if path else ''})")
        self.row = row
        self.column = column
        self.path = path


class MissingColumn(DataError):
    def __init__(self, column: str, path: str = "", row: int = 0):
        super().__init__(f"missing column {column!r} in header{' of ' + path if path else ''}")
        self.column = column
        self.path = path
        self.row = row


class BadDate(CsvRowError):
    def __init__(self, row: int, column: str = "date", path: str = ""):
        super().__init__("unparseable ISO date", row, column, path)


class BadNumber(CsvRowError):
    def __init__(self, row: int, column: str, path: str = ""):
        super().__init__("unparseable number", row, column, path)


class NonPositivePrice(CsvRowError):
    def __init__(self, row: int, column: str = "price", path: str = ""):
        super().__init__("non-positive value", row, column, path)


class DuplicateDate(CsvRowError):
    def __init__(self, row: int, column: str = "date", path: str = ""):
        super().__init__("duplicate date for series", row, column, path)


class InsufficientOverlap(DataError):
    pass


class NotEnoughInstitutions(DataError):
    pass


class MissingInput(DataError):
    def __init__(self, path: str):
        super().__init__(f"input file not found: {path}")
        self.path = path


# -- numerics ---------------------------------------------------------------


class Degenerate(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class AllInfinite(NumericalError):
    pass


class SingularCovariance(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class ZeroLambda(NumericalError):
    pass


class ZeroVolatility(NumericalError):
    pass


class NonPositiveClusterVariance(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


# -- pipeline ---------------------------------------------------------------


class MissingFrmWindow(DataError):
    def __init__(self, date: str, tau: float, detail: str = ""):
        super().__init__(detail or f"no FRM window output for date {date} at tau={tau}")
        self.date = date
        self.tau = tau


class WindowFitError(NumericalError):
    """A solver failure tagged with the window and institution that raised it."""

    def __init__(self, window: int, institution: str, cause: Exception):
        super().__init__(f"window {window}, institution {institution}: {cause}")
        self.window = window
        self.institution = institution
