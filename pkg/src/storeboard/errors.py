"""Exception types shared across the storeboard stack."""

from __future__ import annotations


class StoreboardError(Exception):
    """Base class for all storeboard errors."""


class IngestError(StoreboardError):
    pass


class MissingColumn(IngestError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"mandatory column not found in header: {name!r}")


class TooManyBadRows(IngestError):
    """Reject rate above 1%: almost certainly the wrong file or wrong variant."""

    def __init__(self, rejected: int, total: int):
        self.rejected = rejected
        self.total = total
        super().__init__(
            f"{rejected} of {total} rows rejected (> 1%); wrong file or wrong dataset variant?"
        )


class DanglingKey(StoreboardError):
    """A fact row references a dimension value the dimension table lost.

    Construction guarantees this cannot happen; raising it signals a bug.
    """


class UnknownColumn(StoreboardError):
    def __init__(self, table: str | None, column: str):
        self.table = table
        self.column = column
        where = f"{table}[{column}]" if table else column
        super().__init__(f"unknown column: {where}")


class AmbiguousColumn(StoreboardError):
    def __init__(self, column: str, tables: list[str]):
        self.column = column
        self.tables = tables
        super().__init__(
            f"column {column!r} exists in multiple tables ({', '.join(tables)}); qualify it"
        )


class UnknownMeasure(StoreboardError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown measure: [{name}]")


class MeasureSyntaxError(StoreboardError):
    def __init__(self, position: int, expected: str, found: str):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(f"at offset {position}: expected {expected}, found {found}")


class UnknownFunction(StoreboardError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown function: {name}")


class CycleDetected(StoreboardError):
    def __init__(self, chain: list[str]):
        self.chain = chain
        super().__init__("measure reference cycle: " + " -> ".join(f"[{n}]" for n in chain))


class EmptyAggregation(StoreboardError):
    """MIN/MAX/AVERAGE over an empty selection; never silently fabricated."""

    def __init__(self, func: str, column: str):
        self.func = func
        self.column = column
        super().__init__(f"{func}({column}) over an empty selection")


class SnapshotFormatError(StoreboardError):
    pass


class QueryError(StoreboardError):
    pass


class NoDiscountVariation(StoreboardError):
    def __init__(self, levels: int):
        self.levels = levels
        super().__init__(f"discount threshold needs >= 2 distinct levels, found {levels}")


class CalibrationError(StoreboardError):
    """The synthetic dataset failed its own target self-check."""
