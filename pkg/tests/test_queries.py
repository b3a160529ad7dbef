from __future__ import annotations

import math
import random

import pytest

from storeboard.errors import QueryError, UnknownMeasure
from storeboard.queries import (
    BinSpec,
    GroupQuery,
    context_from_json,
    context_to_json,
    query_from_json,
    query_to_json,
    result_to_json,
    run,
    run_binned,
    top_n,
)
from storeboard.star import ColumnPredicate, FilterContext, InSet

from helpers import build_schema, random_query, random_rows
from oracles import assert_results_equal, oracle_run


def in_ctx(table, column, *values):
    return FilterContext.of([ColumnPredicate(table, column, InSet(frozenset(values)))])


def test_group_by_category_margins(twelve_schema, twelve_rows, catalog):
    q = GroupQuery(group_by=((("Product"), "Category"),), measures=("Profit Margin %",))
    res = run(twelve_schema, catalog, q)
    assert res.group_columns == ("Category",)
    assert [r.keys for r in res.rows] == [("Furniture",), ("Technology",)]
    by_cat = {}
    for r in twelve_rows:
        s, p = by_cat.get(r["Category"], (0.0, 0.0))
        by_cat[r["Category"]] = (s + r["Sales"], p + r["Profit"])
    for row in res.rows:
        s, p = by_cat[row.keys[0]]
        assert row.values["Profit Margin %"] == pytest.approx(p / s, rel=1e-12)


def test_filtered_group_yields_single_row(twelve_schema, catalog):
    q = GroupQuery(
        group_by=((None, "Market"),),
        measures=("Total Sales",),
        filters=in_ctx(None, "Market", "APAC"),
    )
    res = run(twelve_schema, catalog, q)
    assert len(res.rows) == 1
    assert res.rows[0].keys == ("APAC",)
    assert res.rows[0].values["Total Sales"] == res.total_row["Total Sales"]


def test_scalar_query_has_total_only(twelve_schema, catalog):
    res = run(twelve_schema, catalog, GroupQuery(measures=("Total Orders",)))
    assert res.rows == []
    assert res.total_row["Total Orders"] == 8.0


def test_additive_totals_match_total_row(twelve_schema, catalog):
    q = GroupQuery(group_by=((None, "Market"),), measures=("Total Sales", "Total Profit"))
    res = run(twelve_schema, catalog, q)
    for m in q.measures:
        col_total = sum(r.values[m] for r in res.rows)
        assert col_total == pytest.approx(res.total_row[m], rel=1e-9)


def test_single_bin_covers_everything(twelve_schema, catalog):
    q = GroupQuery(
        measures=("Total Sales", "Total Profit"),
        bin=BinSpec(None, "Discount", "fixed-width", width=1.0, origin=0.0),
    )
    res = run_binned(twelve_schema, catalog, q)
    assert len(res.rows) == 1
    assert res.rows[0].keys == (0.0,)
    assert res.rows[0].bin_range == (0.0, 1.0)
    for m in q.measures:
        assert res.rows[0].values[m] == res.total_row[m]


def test_distinct_values_binning_ascending(twelve_schema, twelve_rows, catalog):
    q = GroupQuery(measures=("Total Sales",), bin=BinSpec(None, "Discount", "distinct-values"))
    res = run_binned(twelve_schema, catalog, q)
    keys = [r.keys[0] for r in res.rows]
    assert keys == sorted(set(r["Discount"] for r in twelve_rows))


def test_fixed_width_binning_matches_manual_assignment(catalog):
    rng = random.Random(5)
    rows = random_rows(rng, 30)
    schema = build_schema(rows)
    width = 0.05
    q = GroupQuery(
        measures=("Total Sales",),
        bin=BinSpec(None, "Discount", "fixed-width", width=width, origin=0.0),
    )
    res = run_binned(schema, catalog, q)
    manual: dict[float, float] = {}
    for r in rows:
        lo = 0.0 + math.floor((r["Discount"] - 0.0) / width) * width
        manual[lo] = manual.get(lo, 0.0) + r["Sales"]
    assert {r.keys[0] for r in res.rows} == set(manual)
    for row in res.rows:
        assert row.values["Total Sales"] == pytest.approx(manual[row.keys[0]], rel=1e-12)
        assert row.bin_range == (row.keys[0], row.keys[0] + width)


def test_bin_partition_property(twelve_schema, catalog):
    q = GroupQuery(
        measures=("Total Orders",),
        bin=BinSpec(None, "Discount", "fixed-width", width=0.15, origin=0.0),
    )
    res = run_binned(twelve_schema, catalog, q)
    q_count = GroupQuery(
        measures=("Row Count",),
        bin=BinSpec(None, "Discount", "fixed-width", width=0.15, origin=0.0),
    )
    cat = _with_row_count(catalog)
    res_c = run_binned(twelve_schema, cat, q_count)
    assert sum(r.values["Row Count"] for r in res_c.rows) == twelve_schema.row_count


def _with_row_count(catalog):
    cat = catalog.subset(catalog.names())
    cat.register("Row Count", "COUNT(Sales)")
    return cat


def test_top_n_worst_subcategory(twelve_schema, catalog):
    q = GroupQuery(
        group_by=(("Product", "SubCategory"),),
        measures=("Total Profit",),
        order_by=("Total Profit", "asc"),
        limit=1,
    )
    res = top_n(twelve_schema, catalog, q)
    assert len(res.rows) == 1
    assert res.rows[0].keys == ("Tables",)


def test_top_n_limit_zero(twelve_schema, catalog):
    q = GroupQuery(
        group_by=((None, "Market"),),
        measures=("Total Sales",),
        order_by=("Total Sales", "desc"),
        limit=0,
    )
    res = top_n(twelve_schema, catalog, q)
    assert res.rows == []
    assert res.total_row["Total Sales"] is not None


def test_top_n_ties_break_lexicographically(catalog):
    rows = [
        dict(OrderID="O1", ProductID="P1", Category="B", SubCategory="s", Market="M1",
             OrderDate="2013-01-01", Sales=10.0, Profit=5.0, Discount=0.0),
        dict(OrderID="O2", ProductID="P2", Category="A", SubCategory="s", Market="M1",
             OrderDate="2013-01-02", Sales=10.0, Profit=5.0, Discount=0.0),
    ]
    schema = build_schema(rows)
    q = GroupQuery(
        group_by=(("Product", "Category"),),
        measures=("Total Sales",),
        order_by=("Total Sales", "desc"),
        limit=2,
    )
    res = top_n(schema, catalog, q)
    assert [r.keys[0] for r in res.rows] == ["A", "B"]


def test_top_n_requires_order_and_limit(twelve_schema, catalog):
    with pytest.raises(QueryError):
        top_n(twelve_schema, catalog, GroupQuery(group_by=((None, "Market"),), measures=("Total Sales",)))
    with pytest.raises(QueryError):
        run_binned(twelve_schema, catalog, GroupQuery(measures=("Total Sales",)))


def test_unknown_measure_rejected(twelve_schema, catalog):
    with pytest.raises(UnknownMeasure):
        run(twelve_schema, catalog, GroupQuery(measures=("Nope",)))


def test_empty_aggregation_is_null_cell_not_failure(twelve_schema, catalog):
    cat = catalog.subset(catalog.names())
    cat.register("Min Gain", "CALCULATE(MIN(Profit), Profit > 0)")
    q = GroupQuery(group_by=(("Product", "SubCategory"),), measures=("Min Gain",))
    res = run(twelve_schema, cat, q)
    cells = {r.keys[0]: r.values["Min Gain"] for r in res.rows}
    assert cells["Tables"] is None  # all Tables rows lose money
    assert cells["Phones"] is not None


def test_filter_group_commutation(twelve_schema, catalog):
    grouped = run(
        twelve_schema,
        catalog,
        GroupQuery(group_by=((None, "Market"),), measures=("Total Sales", "Avg Profit per Order")),
    )
    for row in grouped.rows:
        scalar = run(
            twelve_schema,
            catalog,
            GroupQuery(
                measures=("Total Sales", "Avg Profit per Order"),
                filters=in_ctx(None, "Market", row.keys[0]),
            ),
        )
        assert scalar.total_row == row.values


def test_randomized_queries_match_oracle(rng, catalog):
    for n in (1, 30, 120):
        rows = random_rows(rng, n)
        schema = build_schema(rows)
        for _ in range(60):
            q = random_query(rng, rows, catalog)
            got = run(schema, catalog, q)
            want = oracle_run(schema, catalog, q)
            assert_results_equal(got, want)


def test_wire_round_trip(twelve_schema, catalog):
    q = GroupQuery(
        group_by=(("Product", "Category"), (None, "Market")),
        measures=("Total Sales", "Profit Margin %"),
        filters=in_ctx(None, "Market", "APAC", "US"),
        order_by=("Total Sales", "desc"),
        limit=3,
    )
    doc = query_to_json(q)
    q2 = query_from_json(doc)
    assert q2 == q
    res = run(twelve_schema, catalog, q2)
    doc = result_to_json(res)
    assert doc["group_columns"] == ["Category", "Market"]
    assert all(set(r) <= {"keys", "measures", "bin"} for r in doc["rows"])

    binned = GroupQuery(measures=("Total Sales",), bin=BinSpec(None, "Discount", "fixed-width", 0.1, 0.0))
    assert query_from_json(query_to_json(binned)) == binned


def test_context_wire_round_trip():
    from storeboard.star import Range

    ctx = FilterContext.of(
        [
            ColumnPredicate("Geography", "Market", InSet(frozenset(["APAC"]))),
            ColumnPredicate(None, "Discount", Range(0.1, 0.4, True, False)),
        ]
    )
    assert context_from_json(context_to_json(ctx)) == ctx
