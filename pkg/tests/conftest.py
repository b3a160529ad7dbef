from __future__ import annotations

import random

import pytest

from storeboard.measures import register_builtin_catalog

from helpers import build_schema, random_rows


@pytest.fixture
def catalog():
    return register_builtin_catalog()


@pytest.fixture
def twelve_rows():
    """Hand-checkable fixture: 12 lines, 8 orders, 2 categories, 2 markets."""
    rows = []
    spec = [
        # order, product, category, sub, market, discount, sales, profit
        ("O-01", "P-T-1", "Technology", "Phones", "APAC", 0.0, 100.0, 30.0),
        ("O-01", "P-T-2", "Technology", "Copiers", "APAC", 0.1, 200.0, 50.0),
        ("O-02", "P-F-1", "Furniture", "Tables", "APAC", 0.3, 150.0, -40.0),
        ("O-03", "P-F-2", "Furniture", "Chairs", "EMEA", 0.0, 80.0, 12.0),
        ("O-04", "P-T-1", "Technology", "Phones", "EMEA", 0.2, 120.0, 18.0),
        ("O-05", "P-F-1", "Furniture", "Tables", "EMEA", 0.4, 60.0, -25.0),
        ("O-05", "P-F-2", "Furniture", "Chairs", "EMEA", 0.1, 90.0, 9.0),
        ("O-06", "P-T-3", "Technology", "Phones", "US", 0.0, 300.0, 90.0),
        ("O-07", "P-T-3", "Technology", "Phones", "US", 0.1, 250.0, 40.0),
        ("O-07", "P-F-1", "Furniture", "Tables", "US", 0.2, 110.0, -5.0),
        ("O-08", "P-F-3", "Furniture", "Bookcases", "US", 0.0, 70.0, 7.0),
        ("O-08", "P-T-2", "Technology", "Copiers", "US", 0.1, 180.0, 36.0),
    ]
    for i, (order, pid, cat, sub, market, disc, sales, profit) in enumerate(spec):
        rows.append(
            {
                "OrderID": order,
                "ProductID": pid,
                "Category": cat,
                "SubCategory": sub,
                "Market": market,
                "ShipMode": "First Class" if i % 3 == 0 else "Standard Class",
                "OrderDate": f"2013-0{1 + i % 9}-1{i % 10}",
                "Sales": sales,
                "Profit": profit,
                "Discount": disc,
                "Quantity": 1 + i % 4,
                "ShippingCost": 10.0 + i,
                "ShippingPayment": 8.0 + i,
            }
        )
    return rows


@pytest.fixture
def twelve_schema(twelve_rows):
    return build_schema(twelve_rows)


@pytest.fixture
def rng():
    return random.Random(20260810)


@pytest.fixture
def random_schema_rows(rng):
    rows = random_rows(rng, 60)
    return rows, build_schema(rows)
