"""Immutable columnar star schema and filter-context resolution.

Storage model: every table is a set of equal-length column vectors.
String-like columns (text, categorical) are dictionary-encoded as dense
int32 codes into a value list; numeric columns are float64/int64 numpy
arrays; dates are stored as proleptic ordinals (``datetime.date.toordinal``).
Selections are boolean masks over fact-row ordinals.

Everything here is a value: schemas, tables, and filter contexts never
mutate after construction, so concurrent readers need no coordination.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AmbiguousColumn, DanglingKey, UnknownColumn

TEXT_KINDS = ("text", "categorical")
NUMERIC_KINDS = ("money", "fraction", "integer", "date")
COLUMN_KINDS = TEXT_KINDS + NUMERIC_KINDS

FACT = "fact"

#: code used for a missing value in dictionary-encoded columns
MISSING_CODE = -1


def date_to_ordinal(value) -> int:
    if isinstance(value, _dt.date):
        return value.toordinal()
    return _dt.date.fromisoformat(str(value)).toordinal()


def ordinal_to_iso(ordinal: int) -> str:
    return _dt.date.fromordinal(int(ordinal)).isoformat()


class Column:
    """One typed column vector.

    text/categorical columns hold ``codes`` (int32) plus ``dictionary``
    (tuple of str, first-appearance order); numeric kinds hold ``values``
    (float64 for money/fraction, int64 for integer/date ordinals).
    """

    __slots__ = ("kind", "codes", "dictionary", "values", "_index")

    def __init__(self, kind: str, *, codes=None, dictionary=None, values=None):
        if kind not in COLUMN_KINDS:
            raise ValueError(f"unknown column kind: {kind}")
        self.kind = kind
        self._index = None
        if kind in TEXT_KINDS:
            self.codes = np.asarray(codes, dtype=np.int32)
            self.dictionary = tuple(dictionary)
            self.values = None
        else:
            dtype = np.int64 if kind in ("integer", "date") else np.float64
            self.values = np.asarray(values, dtype=dtype)
            self.codes = None
            self.dictionary = None
        for arr in (self.codes, self.values):
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_strings(cls, kind: str, strings: Sequence[str | None]) -> "Column":
        mapping: dict[str, int] = {}
        codes = np.empty(len(strings), dtype=np.int32)
        for i, s in enumerate(strings):
            if s is None:
                codes[i] = MISSING_CODE
                continue
            code = mapping.get(s)
            if code is None:
                code = len(mapping)
                mapping[s] = code
            codes[i] = code
        return cls(kind, codes=codes, dictionary=tuple(mapping))

    @classmethod
    def from_numbers(cls, kind: str, numbers) -> "Column":
        return cls(kind, values=numbers)

    @classmethod
    def from_dates(cls, dates: Sequence) -> "Column":
        return cls("date", values=[date_to_ordinal(d) for d in dates])

    def __len__(self) -> int:
        arr = self.codes if self.codes is not None else self.values
        return len(arr)

    @property
    def is_dictionary(self) -> bool:
        return self.codes is not None

    def code_of(self, value) -> int:
        """Dictionary code for a raw value, or MISSING_CODE when absent."""
        if self._index is None:
            self._index = {v: i for i, v in enumerate(self.dictionary)}
        return self._index.get(value, MISSING_CODE)

    def encode_value(self, value):
        """Raw predicate value -> comparable storage-space value."""
        if self.kind == "date":
            return date_to_ordinal(value)
        if self.is_dictionary:
            return self.code_of(value)
        return value

    def decode(self, ordinal: int):
        """Storage value at a row ordinal -> raw value (str, float, int, ISO date)."""
        if self.is_dictionary:
            code = int(self.codes[ordinal])
            return None if code == MISSING_CODE else self.dictionary[code]
        return self.decode_storage(self.values[ordinal])

    def decode_storage(self, storage_value):
        """One storage-space value (code or number) -> raw value."""
        if self.is_dictionary:
            code = int(storage_value)
            return None if code == MISSING_CODE else self.dictionary[code]
        if self.kind == "date":
            return ordinal_to_iso(int(storage_value))
        if self.kind == "integer":
            return int(storage_value)
        return float(storage_value)

    def storage(self) -> np.ndarray:
        """The per-row storage vector (codes for dictionary columns)."""
        return self.codes if self.is_dictionary else self.values

    def missing_mask(self) -> np.ndarray:
        if self.is_dictionary:
            return self.codes == MISSING_CODE
        if self.values.dtype == np.float64:
            return np.isnan(self.values)
        return np.zeros(len(self.values), dtype=bool)


class ColumnTable:
    """Named table of equal-length columns; key_column values must be unique."""

    def __init__(self, name: str, columns: Mapping[str, Column], key_column: str | None = None):
        self.name = name
        self.columns = dict(columns)
        self.key_column = key_column
        lengths = {len(c) for c in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"table {name!r}: ragged column lengths {sorted(lengths)}")
        self.row_count = lengths.pop() if lengths else 0
        if key_column is not None:
            key = self.columns[key_column]
            storage = key.storage()
            if len(np.unique(storage)) != len(storage):
                raise ValueError(f"table {name!r}: key column {key_column!r} has duplicates")

    def column(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownColumn(self.name, name) from None


@dataclass(frozen=True)
class Relationship:
    fact_column: str
    dimension: str
    dimension_key: str


class StarSchema:
    """A central fact table with keyed dimension tables.

    Construction resolves every fact foreign key to a dimension row ordinal
    once (``fk_rows``); a dangling reference raises DanglingKey, which
    signals a builder bug rather than a data condition.
    """

    def __init__(
        self,
        fact: ColumnTable,
        dimensions: Mapping[str, ColumnTable],
        relationships: Sequence[Relationship],
        meta: Mapping[str, object] | None = None,
    ):
        self.fact = fact
        self.dimensions = dict(dimensions)
        self.relationships = tuple(relationships)
        self.meta = dict(meta or {})
        self.row_count = fact.row_count
        self._fk_rows: dict[str, np.ndarray] = {}
        for rel in self.relationships:
            dim = self.dimensions.get(rel.dimension)
            if dim is None:
                raise UnknownColumn(rel.dimension, rel.dimension_key)
            fk = fact.column(rel.fact_column)
            key = dim.column(rel.dimension_key)
            self._fk_rows[rel.dimension] = self._resolve_fk(rel, fk, key)

    @staticmethod
    def _resolve_fk(rel: Relationship, fk: Column, key: Column) -> np.ndarray:
        if fk.is_dictionary != key.is_dictionary:
            raise DanglingKey(f"{rel.fact_column}: fact/dimension storage kinds differ")
        if fk.is_dictionary:
            if (fk.codes == MISSING_CODE).any():
                raise DanglingKey(f"{rel.fact_column}: missing foreign-key values")
            value_to_row = {key.dictionary[code]: row for row, code in enumerate(key.codes)}
            code_to_row = np.empty(len(fk.dictionary), dtype=np.int64)
            for code, value in enumerate(fk.dictionary):
                row = value_to_row.get(value)
                if row is None:
                    raise DanglingKey(f"{rel.fact_column}={value!r} missing from {rel.dimension}")
                code_to_row[code] = row
            rows = code_to_row[fk.codes]
        else:
            value_to_row = {v: i for i, v in enumerate(key.values.tolist())}
            rows = np.empty(len(fk.values), dtype=np.int64)
            for i, v in enumerate(fk.values.tolist()):
                row = value_to_row.get(v)
                if row is None:
                    raise DanglingKey(f"{rel.fact_column}={v!r} missing from {rel.dimension}")
                rows[i] = row
        rows.setflags(write=False)
        return rows

    def table(self, name: str) -> ColumnTable:
        if name == self.fact.name or name == FACT:
            return self.fact
        try:
            return self.dimensions[name]
        except KeyError:
            raise UnknownColumn(name, "*") from None

    def fk_rows(self, dimension: str) -> np.ndarray:
        """fact row ordinal -> dimension row ordinal."""
        try:
            return self._fk_rows[dimension]
        except KeyError:
            raise UnknownColumn(dimension, "*") from None

    def resolve_column(self, table: str | None, column: str) -> tuple[str, Column]:
        """Find a column, searching fact first then dimensions when unqualified."""
        if table:
            return table, self.table(table).column(column)
        if column in self.fact.columns:
            return self.fact.name, self.fact.columns[column]
        hits = [name for name, dim in self.dimensions.items() if column in dim.columns]
        if not hits:
            raise UnknownColumn(None, column)
        if len(hits) > 1:
            raise AmbiguousColumn(column, hits)
        return hits[0], self.dimensions[hits[0]].columns[column]

    def fact_values(self, table: str | None, column: str) -> tuple[Column, np.ndarray]:
        """A column's storage vector broadcast to fact-row ordinals."""
        tname, col = self.resolve_column(table, column)
        storage = col.storage()
        if tname == self.fact.name or tname == FACT:
            return col, storage
        return col, storage[self.fk_rows(tname)]


# ---------------------------------------------------------------------------
# Filter contexts


@dataclass(frozen=True)
class InSet:
    """Membership predicate; an empty set selects nothing."""

    values: frozenset

    def contains(self, value) -> bool:
        return value in self.values


@dataclass(frozen=True)
class Range:
    """Interval predicate; None bounds are unbounded."""

    lo: object = None
    hi: object = None
    lo_inclusive: bool = True
    hi_inclusive: bool = True

    def contains(self, value) -> bool:
        if self.lo is not None:
            if value < self.lo or (value == self.lo and not self.lo_inclusive):
                return False
        if self.hi is not None:
            if value > self.hi or (value == self.hi and not self.hi_inclusive):
                return False
        return True


def _intersect_ops(a, b):
    if isinstance(a, InSet) and isinstance(b, InSet):
        return InSet(a.values & b.values)
    if isinstance(a, InSet):
        return InSet(frozenset(v for v in a.values if b.contains(v)))
    if isinstance(b, InSet):
        return InSet(frozenset(v for v in b.values if a.contains(v)))
    if a.lo is None:
        lo, lo_inc = b.lo, b.lo_inclusive
    elif b.lo is None or a.lo > b.lo:
        lo, lo_inc = a.lo, a.lo_inclusive
    elif b.lo > a.lo:
        lo, lo_inc = b.lo, b.lo_inclusive
    else:
        lo, lo_inc = a.lo, a.lo_inclusive and b.lo_inclusive
    if a.hi is None:
        hi, hi_inc = b.hi, b.hi_inclusive
    elif b.hi is None or a.hi < b.hi:
        hi, hi_inc = a.hi, a.hi_inclusive
    elif b.hi < a.hi:
        hi, hi_inc = b.hi, b.hi_inclusive
    else:
        hi, hi_inc = a.hi, a.hi_inclusive and b.hi_inclusive
    return Range(lo, hi, lo_inc, hi_inc)


@dataclass(frozen=True)
class ColumnPredicate:
    table: str | None
    column: str
    op: InSet | Range


@dataclass(frozen=True)
class FilterContext:
    """At most one predicate per (table, column); duplicates intersect.

    The empty context selects every fact row.
    """

    predicates: tuple[ColumnPredicate, ...] = ()

    @staticmethod
    def of(preds: Iterable[ColumnPredicate]) -> "FilterContext":
        merged: dict[tuple[str | None, str], ColumnPredicate] = {}
        for p in preds:
            key = (p.table, p.column)
            if key in merged:
                merged[key] = ColumnPredicate(p.table, p.column, _intersect_ops(merged[key].op, p.op))
            else:
                merged[key] = p
        ordered = tuple(merged[k] for k in sorted(merged, key=lambda k: (k[0] or "", k[1])))
        return FilterContext(ordered)

    def is_empty(self) -> bool:
        return not self.predicates


EMPTY_CONTEXT = FilterContext()


def intersect(a: FilterContext, b: FilterContext) -> FilterContext:
    """Context whose selection is exactly resolve(a) & resolve(b)."""
    return FilterContext.of(a.predicates + b.predicates)


def _op_mask(col: Column, op: InSet | Range, storage: np.ndarray) -> np.ndarray:
    if isinstance(op, InSet):
        encoded = [col.encode_value(v) for v in op.values]
        if col.is_dictionary:
            encoded = [c for c in encoded if c != MISSING_CODE]
        if not encoded:
            return np.zeros(len(storage), dtype=bool)
        return np.isin(storage, encoded)
    if col.is_dictionary:
        raise ValueError(f"range predicates need a numeric column, got {col.kind}")
    mask = np.ones(len(storage), dtype=bool)
    if op.lo is not None:
        lo = col.encode_value(op.lo)
        mask &= (storage >= lo) if op.lo_inclusive else (storage > lo)
    if op.hi is not None:
        hi = col.encode_value(op.hi)
        mask &= (storage <= hi) if op.hi_inclusive else (storage < hi)
    return mask


def resolve_rows(schema: StarSchema, ctx: FilterContext) -> np.ndarray:
    """Boolean selection over fact rows satisfying every predicate.

    Dimension predicates are evaluated over the dimension's rows and
    propagated to fact rows through the resolved foreign keys.
    """
    mask = np.ones(schema.row_count, dtype=bool)
    for pred in ctx.predicates:
        tname, col = schema.resolve_column(pred.table, pred.column)
        if tname == schema.fact.name or tname == FACT:
            mask &= _op_mask(col, pred.op, col.storage())
        else:
            dim_mask = _op_mask(col, pred.op, col.storage())
            mask &= dim_mask[schema.fk_rows(tname)]
    return mask
