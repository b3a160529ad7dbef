"""Grouped, binned, and top-N measure evaluation plus the JSON wire format.

This is the single query surface: diagnostics, the HTTP API, the CLI, and
the browser UI all funnel through ``run`` / ``run_binned`` / ``top_n``.
Results are deterministic: default row order is ascending by group key;
explicit orderings break ties by group key ascending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import QueryError, UnknownMeasure
from .measures import MeasureCatalog, evaluate_grouped
from .star import (
    ColumnPredicate,
    FilterContext,
    InSet,
    Range,
    StarSchema,
    intersect,
    resolve_rows,
)


@dataclass(frozen=True)
class BinSpec:
    """Numeric binning: every distinct value, or fixed-width intervals.

    Fixed-width bins are lower-inclusive, upper-exclusive:
    bin i covers [origin + i*width, origin + (i+1)*width).
    """

    table: str | None
    column: str
    mode: str = "distinct-values"
    width: float | None = None
    origin: float = 0.0

    def __post_init__(self):
        if self.mode not in ("distinct-values", "fixed-width"):
            raise QueryError(f"unknown bin mode: {self.mode!r}")
        if self.mode == "fixed-width" and (self.width is None or self.width <= 0):
            raise QueryError("fixed-width binning needs width > 0")


@dataclass(frozen=True)
class GroupQuery:
    group_by: tuple[tuple[str | None, str], ...] = ()
    measures: tuple[str, ...] = ()
    filters: FilterContext = field(default_factory=FilterContext)
    bin: BinSpec | None = None
    order_by: tuple[str, str] | None = None  # (measure, "asc" | "desc")
    limit: int | None = None


@dataclass
class ResultRow:
    keys: tuple
    values: dict[str, float | None]
    bin_range: tuple[float, float] | None = None


@dataclass
class QueryResult:
    group_columns: tuple[str, ...]
    rows: list[ResultRow]
    total_row: dict[str, float | None]


def _sort_default(rows: list[ResultRow]) -> None:
    rows.sort(key=lambda r: tuple((v is None, v) for v in r.keys))


def _apply_order(rows: list[ResultRow], order_by: tuple[str, str]) -> None:
    measure, direction = order_by
    if direction not in ("asc", "desc"):
        raise QueryError(f"order direction must be asc or desc, got {direction!r}")
    _sort_default(rows)  # tie-break base: group key ascending

    def key(row: ResultRow):
        v = row.values.get(measure)
        if v is None:
            return (1, 0.0)
        return (0, v if direction == "asc" else -v)

    rows.sort(key=key)


def _group_vectors(schema: StarSchema, q: GroupQuery, mask: np.ndarray):
    """Per-selected-row key vectors plus decoders, group-by columns then bin."""
    vectors = []
    names = []
    for table, column in q.group_by:
        col, storage = schema.fact_values(table, column)
        vectors.append(("column", col, storage[mask]))
        names.append(column)
    if q.bin is not None:
        col, storage = schema.fact_values(q.bin.table, q.bin.column)
        if col.kind not in ("fraction", "money"):
            raise QueryError(f"bin column must be fraction or money, {q.bin.column} is {col.kind}")
        vals = storage[mask].astype(np.float64)
        keep = ~np.isnan(vals)
        if q.bin.mode == "distinct-values":
            vectors.append(("bin-distinct", col, np.where(keep, vals, np.nan)))
        else:
            idx = np.floor((vals - q.bin.origin) / q.bin.width)
            vectors.append(("bin-width", col, np.where(keep, idx, np.nan)))
        names.append(q.bin.column)
    return names, vectors


def _execute(schema: StarSchema, catalog: MeasureCatalog, q: GroupQuery) -> QueryResult:
    for m in q.measures:
        if m not in catalog:
            raise UnknownMeasure(m)
    mask = resolve_rows(schema, q.filters)

    total_row: dict[str, float | None] = {}
    for m in q.measures:
        vals, empty = evaluate_grouped(catalog.expr(m), schema, mask, None, 1, catalog)
        total_row[m] = None if empty[0] else float(vals[0])

    names, vectors = _group_vectors(schema, q, mask)
    if not vectors:
        return QueryResult((), [], total_row)

    # rows with a missing (NaN) bin value fall out of the grouping entirely
    sel_count = int(mask.sum())
    keep = np.ones(sel_count, dtype=bool)
    for _, _, vec in vectors:
        if vec.dtype == np.float64:
            keep &= ~np.isnan(vec)
    kept = [(kind, col, vec[keep]) for kind, col, vec in vectors]

    # factorize each key vector over the kept rows, then combine
    combined = np.zeros(int(keep.sum()), dtype=np.int64)
    for _, _, vec in kept:
        uniq, codes = np.unique(vec, return_inverse=True)
        combined = combined * np.int64(max(len(uniq), 1)) + codes
    _, first_pos, group_codes_sel = np.unique(combined, return_index=True, return_inverse=True)
    n_groups = len(first_pos)

    # scatter kept-row group codes back to fact-row positions
    kept_idx = np.flatnonzero(mask)[keep]
    effective_mask = np.zeros(schema.row_count, dtype=bool)
    effective_mask[kept_idx] = True
    group_codes = np.zeros(schema.row_count, dtype=np.int64)
    group_codes[kept_idx] = group_codes_sel

    # decode one representative row per group into raw key tuples
    rows: list[ResultRow] = []
    for g in range(n_groups):
        pos = int(first_pos[g])
        keys = []
        bin_range = None
        for kind, col, vec in kept:
            raw = vec[pos]
            if kind == "column":
                keys.append(col.decode_storage(raw))
            elif kind == "bin-distinct":
                keys.append(float(raw))
            else:
                lo = q.bin.origin + float(raw) * q.bin.width
                keys.append(lo)
                bin_range = (lo, lo + q.bin.width)
        rows.append(ResultRow(tuple(keys), {}, bin_range))

    for m in q.measures:
        vals, empty = evaluate_grouped(
            catalog.expr(m), schema, effective_mask, group_codes, n_groups, catalog
        )
        for g in range(n_groups):
            rows[g].values[m] = None if empty[g] else float(vals[g])

    if q.order_by is not None:
        _apply_order(rows, q.order_by)
    else:
        _sort_default(rows)
    if q.limit is not None:
        if q.limit < 0:
            raise QueryError("limit must be >= 0")
        rows = rows[: q.limit]
    return QueryResult(tuple(names), rows, total_row)


def run(schema: StarSchema, catalog: MeasureCatalog, q: GroupQuery) -> QueryResult:
    """Grouped (or scalar, when group_by is empty) measure evaluation."""
    return _execute(schema, catalog, q)


def run_binned(schema: StarSchema, catalog: MeasureCatalog, q: GroupQuery) -> QueryResult:
    """Measure evaluation keyed by bins of a numeric column."""
    if q.bin is None:
        raise QueryError("run_binned needs a BinSpec")
    return _execute(schema, catalog, q)


def top_n(schema: StarSchema, catalog: MeasureCatalog, q: GroupQuery) -> QueryResult:
    """Ordered, limited grouping; ties break by group key ascending."""
    if q.order_by is None or q.limit is None:
        raise QueryError("top_n needs both order_by and limit")
    return _execute(schema, catalog, q)


# ---------------------------------------------------------------------------
# Wire format (JSON bodies shared by the HTTP API, dashboard files, and CLI)


def predicate_to_json(p: ColumnPredicate) -> dict:
    doc: dict = {"table": p.table, "column": p.column}
    if isinstance(p.op, InSet):
        doc["in"] = sorted(p.op.values, key=lambda v: (str(type(v)), v))
    else:
        doc["range"] = {
            "lo": p.op.lo,
            "hi": p.op.hi,
            "lo_inclusive": p.op.lo_inclusive,
            "hi_inclusive": p.op.hi_inclusive,
        }
    return doc


def predicate_from_json(doc: dict) -> ColumnPredicate:
    table = doc.get("table")
    column = doc.get("column")
    if not column:
        raise QueryError("predicate needs a column")
    if "in" in doc:
        return ColumnPredicate(table, column, InSet(frozenset(doc["in"])))
    if "range" in doc:
        r = doc["range"]
        return ColumnPredicate(
            table,
            column,
            Range(
                r.get("lo"),
                r.get("hi"),
                bool(r.get("lo_inclusive", True)),
                bool(r.get("hi_inclusive", True)),
            ),
        )
    raise QueryError(f"predicate on {column!r} needs 'in' or 'range'")


def context_to_json(ctx: FilterContext) -> dict:
    return {"predicates": [predicate_to_json(p) for p in ctx.predicates]}


def context_from_json(doc: dict | None) -> FilterContext:
    if not doc:
        return FilterContext()
    return FilterContext.of(predicate_from_json(p) for p in doc.get("predicates", []))


def query_to_json(q: GroupQuery) -> dict:
    doc: dict = {
        "group_by": [[t, c] for t, c in q.group_by],
        "measures": list(q.measures),
        "filters": context_to_json(q.filters),
    }
    if q.bin is not None:
        b: dict = {"table": q.bin.table, "column": q.bin.column, "mode": q.bin.mode}
        if q.bin.mode == "fixed-width":
            b["width"] = q.bin.width
            b["origin"] = q.bin.origin
        doc["bin"] = b
    if q.order_by is not None:
        doc["order_by"] = {"measure": q.order_by[0], "direction": q.order_by[1]}
    if q.limit is not None:
        doc["limit"] = q.limit
    return doc


def query_from_json(doc: dict) -> GroupQuery:
    group_by = tuple((g[0], g[1]) for g in doc.get("group_by", []))
    measures = tuple(doc.get("measures", []))
    filters = context_from_json(doc.get("filters"))
    bin_spec = None
    if doc.get("bin"):
        b = doc["bin"]
        bin_spec = BinSpec(
            b.get("table"),
            b["column"],
            b.get("mode", "distinct-values"),
            b.get("width"),
            float(b.get("origin", 0.0)),
        )
    order_by = None
    if doc.get("order_by"):
        order_by = (doc["order_by"]["measure"], doc["order_by"].get("direction", "desc"))
    limit = doc.get("limit")
    return GroupQuery(group_by, measures, filters, bin_spec, order_by, limit)


def result_to_json(res: QueryResult) -> dict:
    rows = []
    for r in res.rows:
        row: dict = {"keys": list(r.keys), "measures": r.values}
        if r.bin_range is not None:
            row["bin"] = [r.bin_range[0], r.bin_range[1]]
        rows.append(row)
    return {"group_columns": list(res.group_columns), "rows": rows, "total_row": res.total_row}
