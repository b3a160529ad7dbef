"""Fixture builders: tiny hand-made schemas and randomized mini-schemas."""

from __future__ import annotations

import random

from storeboard.measures import (
    AGG_FUNCS,
    Binary,
    CalcFilter,
    Calculate,
    ColumnAgg,
    Divide,
    MeasureCatalog,
    MeasureRef,
    NumberLiteral,
)
from storeboard.queries import BinSpec, GroupQuery
from storeboard.star import (
    Column,
    ColumnPredicate,
    ColumnTable,
    FilterContext,
    InSet,
    Range,
    Relationship,
    StarSchema,
)

CATEGORIES = {
    "Furniture": ("Tables", "Chairs"),
    "Technology": ("Phones", "Copiers"),
    "Office Supplies": ("Paper", "Binders"),
}
MARKETS = ("APAC", "EMEA", "US")
DISCOUNT_LEVELS = (0.0, 0.1, 0.2, 0.3, 0.4)


def build_schema(rows: list[dict]) -> StarSchema:
    """Star schema from literal fact rows.

    Expected per-row keys: OrderID, ProductID, Category, SubCategory,
    Market, OrderDate (ISO), Sales, Profit, Discount, Quantity,
    ShippingCost, ShippingPayment, ShipMode. Product/Geography/Date/ShipMode
    dimensions are derived by first-appearance deduplication.
    """
    products: dict[str, tuple[str, str]] = {}
    markets: dict[str, None] = {}
    dates: dict[str, None] = {}
    modes: dict[str, None] = {}
    for r in rows:
        products.setdefault(r["ProductID"], (r["Category"], r["SubCategory"]))
        markets.setdefault(r["Market"])
        dates.setdefault(r["OrderDate"])
        modes.setdefault(r.get("ShipMode", "Standard Class"))

    fact = ColumnTable(
        "fact",
        {
            "OrderID": Column.from_strings("text", [r["OrderID"] for r in rows]),
            "ProductID": Column.from_strings("categorical", [r["ProductID"] for r in rows]),
            "Market": Column.from_strings("categorical", [r["Market"] for r in rows]),
            "ShipMode": Column.from_strings("categorical", [r.get("ShipMode", "Standard Class") for r in rows]),
            "OrderDate": Column.from_dates([r["OrderDate"] for r in rows]),
            "Sales": Column.from_numbers("money", [r["Sales"] for r in rows]),
            "Profit": Column.from_numbers("money", [r["Profit"] for r in rows]),
            "Discount": Column.from_numbers("fraction", [r["Discount"] for r in rows]),
            "Quantity": Column.from_numbers("integer", [r.get("Quantity", 1) for r in rows]),
            "ShippingCost": Column.from_numbers("money", [r.get("ShippingCost", 0.0) for r in rows]),
            "ShippingPayment": Column.from_numbers("money", [r.get("ShippingPayment", 0.0) for r in rows]),
        },
    )
    product_ids = list(products)
    dims = {
        "Product": ColumnTable(
            "Product",
            {
                "ProductID": Column.from_strings("categorical", product_ids),
                "Category": Column.from_strings("categorical", [products[p][0] for p in product_ids]),
                "SubCategory": Column.from_strings("categorical", [products[p][1] for p in product_ids]),
            },
            key_column="ProductID",
        ),
        "Geography": ColumnTable(
            "Geography",
            {"Market": Column.from_strings("categorical", list(markets))},
            key_column="Market",
        ),
        "Date": ColumnTable(
            "Date",
            {
                "OrderDate": Column.from_dates(list(dates)),
                "Year": Column.from_numbers("integer", [int(d[:4]) for d in dates]),
            },
            key_column="OrderDate",
        ),
        "ShipMode": ColumnTable(
            "ShipMode",
            {"ShipMode": Column.from_strings("categorical", list(modes))},
            key_column="ShipMode",
        ),
    }
    rels = [
        Relationship("ProductID", "Product", "ProductID"),
        Relationship("Market", "Geography", "Market"),
        Relationship("OrderDate", "Date", "OrderDate"),
        Relationship("ShipMode", "ShipMode", "ShipMode"),
    ]
    return StarSchema(fact, dims, rels)


def random_rows(rng: random.Random, n: int) -> list[dict]:
    rows = []
    for i in range(n):
        category = rng.choice(list(CATEGORIES))
        sub = rng.choice(CATEGORIES[category])
        rows.append(
            {
                "OrderID": f"O-{rng.randrange(max(2, n // 2)):04d}",
                "ProductID": f"P-{category[:3].upper()}-{rng.randrange(max(2, n // 3)):03d}",
                "Category": category,
                "SubCategory": sub,
                "Market": rng.choice(MARKETS),
                "ShipMode": rng.choice(("Standard Class", "First Class")),
                "OrderDate": f"201{rng.randrange(1, 5)}-{rng.randrange(1, 13):02d}-{rng.randrange(1, 28):02d}",
                "Sales": round(rng.uniform(5, 500), 2),
                "Profit": round(rng.uniform(-120, 180), 2),
                "Discount": rng.choice(DISCOUNT_LEVELS),
                "Quantity": rng.randrange(1, 6),
                "ShippingCost": round(rng.uniform(1, 60), 2),
                "ShippingPayment": round(rng.uniform(1, 50), 2),
            }
        )
    # ProductID -> (Category, SubCategory) must stay functional
    seen: dict[str, tuple[str, str]] = {}
    for r in rows:
        if r["ProductID"] in seen:
            r["Category"], r["SubCategory"] = seen[r["ProductID"]]
        else:
            seen[r["ProductID"]] = (r["Category"], r["SubCategory"])
    return rows


GROUPABLE = (
    ("Product", "Category"),
    ("Product", "SubCategory"),
    ("Geography", "Market"),
    (None, "ShipMode"),
    ("Date", "Year"),
    (None, "Discount"),
)


def random_context(rng: random.Random, rows: list[dict]) -> FilterContext:
    preds = []
    for _ in range(rng.randrange(0, 3)):
        kind = rng.random()
        if kind < 0.45:
            values = frozenset(rng.sample(list(CATEGORIES), rng.randrange(1, 3)))
            preds.append(ColumnPredicate("Product", "Category", InSet(values)))
        elif kind < 0.7:
            values = frozenset(rng.sample(MARKETS, rng.randrange(1, 3)))
            preds.append(ColumnPredicate(None, "Market", InSet(values)))
        elif kind < 0.85:
            lo, hi = sorted((rng.choice(DISCOUNT_LEVELS), rng.choice(DISCOUNT_LEVELS)))
            preds.append(
                ColumnPredicate(
                    None, "Discount", Range(lo, hi, rng.random() < 0.8, rng.random() < 0.8)
                )
            )
        else:
            lo = round(rng.uniform(0, 300), 2)
            preds.append(ColumnPredicate("fact", "Sales", Range(lo, None, True, True)))
    return FilterContext.of(preds)


def random_query(rng: random.Random, rows: list[dict], catalog: MeasureCatalog) -> GroupQuery:
    group_by = tuple(rng.sample(GROUPABLE, rng.randrange(0, 3)))
    measures = tuple(rng.sample(catalog.names(), rng.randrange(1, min(4, len(catalog)) + 1)))
    filters = random_context(rng, rows)
    bin_spec = None
    if rng.random() < 0.35:
        if rng.random() < 0.5:
            bin_spec = BinSpec(None, "Discount", "distinct-values")
        else:
            bin_spec = BinSpec(
                "fact", "Sales", "fixed-width", width=rng.choice((50.0, 120.0)), origin=0.0
            )
        group_by = tuple(g for g in group_by if g[1] != bin_spec.column)
    order_by = None
    limit = None
    if (group_by or bin_spec) and rng.random() < 0.4:
        order_by = (rng.choice(measures), rng.choice(("asc", "desc")))
        limit = rng.randrange(0, 6)
    return GroupQuery(group_by, measures, filters, bin_spec, order_by, limit)


# ---------------------------------------------------------------------------
# Random measure ASTs for round-trip checks

_MEASURE_NAMES = ("Total Sales", "Profit Margin %", "Weird  name_7", "a")
_AGG_COLUMNS = (("fact", "Sales"), (None, "Profit"), ("Product", "Category"), (None, "Qty2"))
_FILTER_COLUMNS = ((None, "Profit"), ("Geography", "Market"), ("fact", "Discount"))


def random_number(rng: random.Random) -> float:
    kind = rng.random()
    if kind < 0.4:
        return float(rng.randrange(-1000, 1000))
    if kind < 0.8:
        return round(rng.uniform(-1e4, 1e4), rng.randrange(1, 6))
    return rng.uniform(-1e12, 1e12) * 10 ** rng.randrange(-12, 12)


def random_expr(rng: random.Random, depth: int = 5):
    """A random, printable measure AST of bounded depth."""
    leaf = depth <= 0 or rng.random() < 0.3
    if leaf:
        kind = rng.random()
        if kind < 0.4:
            return NumberLiteral(random_number(rng))
        if kind < 0.75:
            func = rng.choice(AGG_FUNCS)
            table, column = rng.choice(_AGG_COLUMNS)
            return ColumnAgg(func, table, column)
        return MeasureRef(rng.choice(_MEASURE_NAMES))
    kind = rng.random()
    if kind < 0.45:
        op = rng.choice("+-*/")
        return Binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
    if kind < 0.75:
        return Divide(
            random_expr(rng, depth - 1),
            random_expr(rng, depth - 1),
            random_expr(rng, depth - 1),
        )
    filters = tuple(
        CalcFilter(
            *rng.choice(_FILTER_COLUMNS),
            rng.choice(("=", "<", "<=", ">", ">=")),
            rng.choice(("APAC", -3.5, 0.0, 17.0)) if rng.random() < 0.5 else random_number(rng),
        )
        for _ in range(rng.randrange(1, 3))
    )
    return Calculate(random_expr(rng, depth - 1), filters)
