"""Naive full-scan reference implementations used to check the engine.

Everything here walks fact rows one by one in Python. Float accumulation
is sequential in row order, which matches the engine's bincount-based
aggregation exactly, so comparisons can demand bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np

from storeboard.measures import (
    Binary,
    Calculate,
    ColumnAgg,
    Divide,
    MeasureRef,
    NumberLiteral,
)
from storeboard.star import FACT, InSet, Range, StarSchema


def _find_column(schema: StarSchema, table, column):
    """Independent reimplementation of unqualified-column resolution."""
    if table in (FACT, schema.fact.name):
        return schema.fact.name, schema.fact.columns[column]
    if table:
        return table, schema.dimensions[table].columns[column]
    if column in schema.fact.columns:
        return schema.fact.name, schema.fact.columns[column]
    hits = [(name, dim.columns[column]) for name, dim in schema.dimensions.items() if column in dim.columns]
    if len(hits) != 1:
        raise KeyError(column)
    return hits[0]


def _dim_row_for_fact(schema: StarSchema, dim_name: str, fact_row: int) -> int:
    """Resolve a fact row to its dimension row by scanning key values."""
    rel = next(r for r in schema.relationships if r.dimension == dim_name)
    dim = schema.dimensions[dim_name]
    fk_col = schema.fact.columns[rel.fact_column]
    key_col = dim.columns[rel.dimension_key]
    want = fk_col.decode(fact_row)
    for row in range(dim.row_count):
        if key_col.decode(row) == want:
            return row
    raise AssertionError(f"dangling key {want!r} in {dim_name}")


def _storage_value(col, row: int):
    """Numeric storage-space value (code for dictionary, number otherwise)."""
    if col.is_dictionary:
        return int(col.codes[row])
    return col.values[row]


def _raw_value(schema: StarSchema, table_name: str, col, fact_row: int):
    if table_name in (FACT, schema.fact.name):
        return col.decode(fact_row)
    return col.decode(_dim_row_for_fact(schema, table_name, fact_row))


def _numeric_value(schema: StarSchema, table_name: str, col, fact_row: int):
    """Storage-space numeric value at fact grain, or None when missing."""
    if table_name in (FACT, schema.fact.name):
        row = fact_row
    else:
        row = _dim_row_for_fact(schema, table_name, fact_row)
    if col.is_dictionary:
        code = int(col.codes[row])
        return None if code < 0 else code
    v = col.values[row]
    if col.values.dtype == np.float64 and math.isnan(v):
        return None
    return v


def _range_holds(op: Range, v) -> bool:
    if op.lo is not None:
        if v < op.lo:
            return False
        if v == op.lo and not op.lo_inclusive:
            return False
    if op.hi is not None:
        if v > op.hi:
            return False
        if v == op.hi and not op.hi_inclusive:
            return False
    return True


def predicate_holds(schema: StarSchema, pred, fact_row: int) -> bool:
    tname, col = _find_column(schema, pred.table, pred.column)
    raw = _raw_value(schema, tname, col, fact_row)
    if isinstance(pred.op, InSet):
        if raw is None:
            return False
        return raw in pred.op.values
    assert isinstance(pred.op, Range)
    if raw is None or (isinstance(raw, float) and math.isnan(raw)):
        return False
    return _range_holds(pred.op, raw)


def oracle_resolve(schema: StarSchema, ctx) -> list[int]:
    """Row-by-row filter evaluation; returns selected fact ordinals in order."""
    out = []
    for row in range(schema.row_count):
        if all(predicate_holds(schema, p, row) for p in ctx.predicates):
            out.append(row)
    return out


def oracle_eval(schema: StarSchema, catalog, expr, rows: list[int]):
    """Evaluate a measure over explicit fact rows; None means empty aggregation."""
    if isinstance(expr, NumberLiteral):
        return float(expr.value)
    if isinstance(expr, MeasureRef):
        return oracle_eval(schema, catalog, catalog.expr(expr.name), rows)
    if isinstance(expr, Calculate):
        sub = [r for r in rows if all(_calc_filter_holds(schema, f, r) for f in expr.filters)]
        return oracle_eval(schema, catalog, expr.inner, sub)
    if isinstance(expr, Divide):
        den = oracle_eval(schema, catalog, expr.denominator, rows)
        if den is None:
            return None
        if den == 0:
            return oracle_eval(schema, catalog, expr.alternate, rows)
        num = oracle_eval(schema, catalog, expr.numerator, rows)
        if num is None:
            return None
        return float(np.float64(num) / np.float64(den))
    if isinstance(expr, Binary):
        left = oracle_eval(schema, catalog, expr.left, rows)
        right = oracle_eval(schema, catalog, expr.right, rows)
        if left is None or right is None:
            return None
        a, b = np.float64(left), np.float64(right)
        with np.errstate(invalid="ignore", divide="ignore"):
            if expr.op == "+":
                return float(a + b)
            if expr.op == "-":
                return float(a - b)
            if expr.op == "*":
                return float(a * b)
            return float(a / b)
    assert isinstance(expr, ColumnAgg)
    tname, col = _find_column(schema, expr.table, expr.column)
    values = [_numeric_value(schema, tname, col, r) for r in rows]
    present = [v for v in values if v is not None]
    if expr.func == "COUNT":
        return float(len(present))
    if expr.func == "DISTINCTCOUNT":
        return float(len(set(present)))
    if not present:
        return 0.0 if expr.func == "SUM" else None
    floats = [float(v) for v in present]
    if expr.func == "SUM":
        total = 0.0
        for v in floats:
            total += v
        return total
    if expr.func == "AVERAGE":
        total = 0.0
        for v in floats:
            total += v
        return total / float(len(floats))
    if expr.func == "MIN":
        return min(floats)
    return max(floats)


def _calc_filter_holds(schema: StarSchema, f, fact_row: int) -> bool:
    tname, col = _find_column(schema, f.table, f.column)
    raw = _raw_value(schema, tname, col, fact_row)
    if raw is None or (isinstance(raw, float) and math.isnan(raw)):
        return False
    if f.op == "=":
        return raw == f.value
    if f.op == "<":
        return raw < f.value
    if f.op == "<=":
        return raw <= f.value
    if f.op == ">":
        return raw > f.value
    return raw >= f.value


def oracle_run(schema: StarSchema, catalog, q):
    """Nested-loop evaluation of a GroupQuery; mirrors QueryResult's shape."""
    rows = oracle_resolve(schema, q.filters)

    total_row = {m: oracle_eval(schema, catalog, catalog.expr(m), rows) for m in q.measures}

    key_fns = []
    names = []
    for table, column in q.group_by:
        tname, col = _find_column(schema, table, column)
        key_fns.append(("column", tname, col))
        names.append(column)
    if q.bin is not None:
        tname, col = _find_column(schema, q.bin.table, q.bin.column)
        key_fns.append(("bin", tname, col))
        names.append(q.bin.column)

    if not key_fns:
        return {"group_columns": (), "rows": [], "total_row": total_row}

    groups: dict[tuple, dict] = {}
    for r in rows:
        keys = []
        bin_range = None
        skip = False
        for kind, tname, col in key_fns:
            if kind == "column":
                keys.append(_raw_value(schema, tname, col, r))
                continue
            v = _numeric_value(schema, tname, col, r)
            if v is None:
                skip = True
                break
            v = float(v)
            if q.bin.mode == "distinct-values":
                keys.append(v)
            else:
                idx = math.floor((v - q.bin.origin) / q.bin.width)
                lo = q.bin.origin + float(idx) * q.bin.width
                keys.append(lo)
                bin_range = (lo, lo + q.bin.width)
        if skip:
            continue
        g = groups.setdefault(tuple(keys), {"rows": [], "bin": bin_range})
        g["rows"].append(r)

    out = []
    for keys, g in groups.items():
        values = {m: oracle_eval(schema, catalog, catalog.expr(m), g["rows"]) for m in q.measures}
        out.append({"keys": keys, "values": values, "bin": g["bin"]})

    out.sort(key=lambda row: tuple((v is None, v) for v in row["keys"]))
    if q.order_by is not None:
        measure, direction = q.order_by

        def order_key(row):
            v = row["values"].get(measure)
            if v is None:
                return (1, 0.0)
            return (0, v if direction == "asc" else -v)

        out.sort(key=order_key)
    if q.limit is not None:
        out = out[: q.limit]
    return {"group_columns": tuple(names), "rows": out, "total_row": total_row}


def assert_results_equal(engine_result, oracle_result):
    """Exact comparison: keys, measure floats (bit-identical), and order."""
    assert engine_result.group_columns == oracle_result["group_columns"]
    assert engine_result.total_row == oracle_result["total_row"]
    assert len(engine_result.rows) == len(oracle_result["rows"]), (
        f"{len(engine_result.rows)} rows != oracle {len(oracle_result['rows'])}"
    )
    for got, want in zip(engine_result.rows, oracle_result["rows"]):
        assert got.keys == want["keys"], f"{got.keys} != {want['keys']}"
        assert got.values == want["values"], f"{got.keys}: {got.values} != {want['values']}"
        assert got.bin_range == want["bin"]
