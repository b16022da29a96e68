"""Exception hierarchy shared by all transitnet modules."""

from __future__ import annotations

from typing import Optional


class TransitError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(TransitError, ValueError):
    pass


class UnsupportedRegionError(InvalidArgumentError):
    """Bounds would cross a pole or the antimeridian."""


class DataError(TransitError):
    """Input data is present but unusable.

    ``context`` names the offending record (a JSON path such as
    ``routes[2].directions[0]`` or a CSV row like ``row 14``).
    """

    def __init__(self, message: str, context: Optional[str] = None):
        self.context = context
        if context:
            message = f"{context}: {message}"
        super().__init__(message)


class SnapshotNotFoundError(DataError, FileNotFoundError):
    pass


class MalformedSnapshotError(DataError):
    pass


class DuplicateIdError(DataError):
    pass


class DanglingReferenceError(DataError):
    def __init__(self, missing_id: str, context: Optional[str] = None):
        self.missing_id = missing_id
        super().__init__(f"unknown stop id {missing_id!r}", context)


class ShortSequenceError(DataError):
    pass


class RowError(DataError):
    """A CSV row failed to parse or validate."""

    def __init__(self, message: str, row: int):
        self.row = row
        super().__init__(message, f"row {row}")


class SelfLoopError(DataError):
    def __init__(self, stop_id: str):
        self.stop_id = stop_id
        super().__init__(f"connection from stop {stop_id!r} to itself")


class UndefinedSpeedError(DataError):
    pass


class DegenerateGeometryError(DataError):
    pass


class DataQualityError(DataError):
    def __init__(self, message: str, count: int):
        self.count = count
        super().__init__(message)


class IncomparableReportsError(TransitError):
    def __init__(self, fields):
        self.fields = sorted(fields)
        super().__init__("reports differ in configuration: " + ", ".join(self.fields))
