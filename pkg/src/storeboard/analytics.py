"""Named diagnostics over the star schema, assembled into a findings report.

Each procedure answers one of the retail questions (category margins,
market prioritization, discount economics, shipping subsidies) or one of
the concentration analyses (sub-category losses, customer loyalty). The
report compares computed values against the reference aggregates; a
finding is only comparable when the dataset fingerprint matches the
reference shape, and the shipping findings additionally require payments
synthesized from the repo's default fee schedule.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from importlib import resources

from . import reference as ref
from .errors import NoDiscountVariation
from .measures import MeasureCatalog
from .queries import BinSpec, GroupQuery, run, run_binned
from .star import ColumnPredicate, FilterContext, InSet, StarSchema

MATCH = "match"
MISMATCH = "mismatch"
NOT_COMPARABLE = "not-comparable"


@dataclass
class Finding:
    id: str
    description: str
    value: float | None
    unit: str  # usd | share | count | level
    expected: float | None = None
    tolerance: float | None = None
    status: str = field(init=False, default=NOT_COMPARABLE)
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.expected is None or self.value is None or self.tolerance is None:
            self.status = NOT_COMPARABLE
        elif abs(self.value - self.expected) <= self.tolerance:
            self.status = MATCH
        else:
            self.status = MISMATCH

    def force_mismatch(self) -> None:
        if self.status == MATCH:
            self.status = MISMATCH


@dataclass
class FindingsReport:
    fingerprint: dict
    findings: list[Finding]
    generated_at: str

    def by_id(self, finding_id: str) -> Finding:
        for f in self.findings:
            if f.id == finding_id:
                return f
        raise KeyError(finding_id)

    @property
    def mismatches(self) -> list[Finding]:
        return [f for f in self.findings if f.status == MISMATCH]

    def to_json(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "generated_at": self.generated_at,
            "findings": [
                {
                    "id": f.id,
                    "description": f.description,
                    "value": f.value,
                    "unit": f.unit,
                    "expected": f.expected,
                    "tolerance": f.tolerance,
                    "status": f.status,
                    "detail": f.detail,
                }
                for f in self.findings
            ],
        }


def _in_ctx(table, column, *values) -> FilterContext:
    return FilterContext.of([ColumnPredicate(table, column, InSet(frozenset(values)))])


def _fmt(value: float | None, unit: str) -> str:
    if value is None:
        return "-"
    if unit == "usd":
        return f"${value / 1e6:.2f}M" if abs(value) >= 1e6 else f"${value:,.0f}"
    if unit == "share":
        return f"{value * 100:.2f}%"
    if unit == "count":
        return f"{value:,.0f}"
    return f"{value:g}"


def render_text(report: FindingsReport) -> str:
    lines = [
        "dataset: {rows} lines, {orders} orders, {customers} customers, {products} SKUs".format(
            rows=report.fingerprint.get("rows", 0),
            orders=report.fingerprint.get("orders", 0),
            customers=report.fingerprint.get("customers", 0),
            products=report.fingerprint.get("products", 0),
        ),
        "",
    ]
    header = f"{'finding':34} {'value':>12} {'expected':>12} {'status':>15}  description"
    lines.append(header)
    lines.append("-" * len(header))
    for f in report.findings:
        lines.append(
            f"{f.id:34} {_fmt(f.value, f.unit):>12} {_fmt(f.expected, f.unit):>12} "
            f"{f.status:>15}  {f.description}"
        )
    counts = {s: sum(1 for f in report.findings if f.status == s) for s in (MATCH, MISMATCH, NOT_COMPARABLE)}
    lines.append("")
    lines.append(
        f"{counts[MATCH]} match, {counts[MISMATCH]} mismatch, {counts[NOT_COMPARABLE]} not-comparable"
    )
    return "\n".join(lines)


def render_tsv(report: FindingsReport) -> str:
    out = ["id\tvalue\tunit\texpected\ttolerance\tstatus\tdescription"]
    for f in report.findings:
        cells = [
            f.id,
            "" if f.value is None else repr(f.value),
            f.unit,
            "" if f.expected is None else repr(f.expected),
            "" if f.tolerance is None else repr(f.tolerance),
            f.status,
            f.description,
        ]
        out.append("\t".join(cells))
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Diagnostic procedures


def load_loyalty_config() -> dict:
    text = resources.files("storeboard.data").joinpath("loyalty.json").read_text("utf-8")
    return json.loads(text)


def dataset_fingerprint(schema: StarSchema, catalog: MeasureCatalog) -> dict:
    res = run(
        schema,
        catalog,
        GroupQuery(measures=("Total Orders",)),
    )
    sku_cat = catalog.subset(())
    sku_cat.register("n", "DISTINCTCOUNT(ProductID)")
    sku_cat.register("c", "DISTINCTCOUNT(CustomerID)")
    counts = run(schema, sku_cat, GroupQuery(measures=("n", "c")))
    return {
        "rows": schema.row_count,
        "orders": int(res.total_row["Total Orders"] or 0),
        "customers": int(counts.total_row["c"] or 0),
        "products": int(counts.total_row["n"] or 0),
        "checksum": schema.meta.get("checksum", ""),
        "payment_source": schema.meta.get("payment_source", ""),
    }


def matches_reference_shape(fingerprint: dict) -> bool:
    return (
        fingerprint["orders"] == ref.TOTAL_ORDERS
        and fingerprint["customers"] == ref.TOTAL_CUSTOMERS
        and fingerprint["products"] == ref.TOTAL_SKUS
    )


def category_margins(schema: StarSchema, catalog: MeasureCatalog, comparable: bool = True) -> list[Finding]:
    """Profit margin per category plus the overall margin."""
    res = run(
        schema,
        catalog,
        GroupQuery(group_by=(("Product", "Category"),), measures=("Profit Margin %", "Total Sales")),
    )
    findings = [
        Finding(
            "margin-overall",
            "overall profit margin",
            res.total_row["Profit Margin %"],
            "share",
            ref.OVERALL_MARGIN if comparable else None,
            0.003,
        )
    ]
    by_cat = {row.keys[0]: row.values["Profit Margin %"] for row in res.rows}
    for category, expected in ref.CATEGORY_MARGINS.items():
        findings.append(
            Finding(
                f"margin-{category.lower().replace(' ', '-')}",
                f"{category} profit margin",
                by_cat.get(category),
                "share",
                expected if comparable and category in by_cat else None,
                0.002,
            )
        )
    return findings


def market_matrix(schema: StarSchema, catalog: MeasureCatalog) -> list[dict]:
    """Per-market sales, profit, margin, and order counts (bubble-chart rows)."""
    res = run(
        schema,
        catalog,
        GroupQuery(
            group_by=(("Geography", "Market"),),
            measures=("Total Sales", "Total Profit", "Profit Margin %", "Total Orders"),
        ),
    )
    return [
        {
            "market": row.keys[0],
            "sales": row.values["Total Sales"],
            "profit": row.values["Total Profit"],
            "margin": row.values["Profit Margin %"],
            "order_count": row.values["Total Orders"],
        }
        for row in res.rows
    ]


def discount_threshold(schema: StarSchema, catalog: MeasureCatalog) -> dict:
    """Discount level series and the last level with non-negative avg profit.

    Scanning distinct levels ascending, the threshold is the largest level
    such that every level at or below it keeps average profit per order
    non-negative.
    """
    res = run_binned(
        schema,
        catalog,
        GroupQuery(
            measures=("Total Sales", "Avg Profit per Order"),
            bin=BinSpec(None, "Discount", "distinct-values"),
        ),
    )
    if len(res.rows) < 2:
        raise NoDiscountVariation(len(res.rows))
    series = [
        {
            "discount": row.keys[0],
            "total_sales": row.values["Total Sales"],
            "avg_profit_per_order": row.values["Avg Profit per Order"],
        }
        for row in res.rows
    ]
    threshold = None
    for point in series:
        avg = point["avg_profit_per_order"]
        if avg is None or avg < 0:
            break
        threshold = point["discount"]
    return {"series": series, "threshold": threshold}


def shipping_subsidy(schema: StarSchema, catalog: MeasureCatalog) -> dict:
    """Unrecovered shipping cost per mode; flags the worst offender."""
    res = run(
        schema,
        catalog,
        GroupQuery(group_by=((None, "ShipMode"),), measures=("Shipping Subsidy", "Total Orders")),
    )
    modes = {}
    for row in res.rows:
        subsidy = row.values["Shipping Subsidy"]
        shipments = row.values["Total Orders"]
        modes[row.keys[0]] = {
            "subsidy": subsidy,
            "shipments": shipments,
            "per_shipment": (subsidy / shipments) if subsidy is not None and shipments else None,
        }
    total = res.total_row["Shipping Subsidy"]
    worst = max(modes, key=lambda m: modes[m]["subsidy"] or float("-inf")) if modes else None
    return {"modes": modes, "total": total, "worst_mode": worst}


def subcategory_losses(schema: StarSchema, catalog: MeasureCatalog, category: str = "Furniture") -> dict:
    """Loss and SKU concentration across one category's sub-categories.

    loss_share(s) = max(0, -net(s)) / sum of losses; undefined (None) when
    every sub-category is profitable.
    """
    ctx = _in_ctx("Product", "Category", category)
    cat = catalog.subset([n for n in ("Total Profit",) if n in catalog])
    if "Total Profit" not in cat:
        cat.register("Total Profit", "SUM(Profit)")
    cat.register("SKU Count", "DISTINCTCOUNT(ProductID)")
    res = run(
        schema,
        cat,
        GroupQuery(
            group_by=(("Product", "SubCategory"),),
            measures=("Total Profit", "SKU Count"),
            filters=ctx,
        ),
    )
    total_skus = res.total_row["SKU Count"] or 0
    loss_total = sum(max(0.0, -(row.values["Total Profit"] or 0.0)) for row in res.rows)
    out = []
    for row in res.rows:
        net = row.values["Total Profit"] or 0.0
        out.append(
            {
                "sub_category": row.keys[0],
                "net_profit": net,
                "loss_share": (max(0.0, -net) / loss_total) if loss_total > 0 else None,
                "sku_share": (row.values["SKU Count"] or 0.0) / total_skus if total_skus else None,
            }
        )
    return {"category": category, "sub_categories": out, "loss_total": loss_total}


def loyalty_concentration(
    schema: StarSchema, catalog: MeasureCatalog, min_orders: int | None = None
) -> dict:
    """Partition customers by distinct-order count; share of base and profit."""
    config = load_loyalty_config()
    threshold = int(min_orders if min_orders is not None else config["super_loyal_min_orders"])
    res = run(
        schema,
        catalog,
        GroupQuery(group_by=((None, "CustomerID"),), measures=("Total Orders", "Total Profit")),
    )
    loyal_name = config["segments"]["loyal"]
    casual_name = config["segments"]["casual"]
    segments = {
        loyal_name: {"customers": 0, "profit": 0.0},
        casual_name: {"customers": 0, "profit": 0.0},
    }
    for row in res.rows:
        seg = loyal_name if (row.values["Total Orders"] or 0) >= threshold else casual_name
        segments[seg]["customers"] += 1
        segments[seg]["profit"] += row.values["Total Profit"] or 0.0
    n_customers = sum(s["customers"] for s in segments.values())
    total_profit = sum(s["profit"] for s in segments.values())
    for name, seg in segments.items():
        seg["customer_share"] = seg["customers"] / n_customers if n_customers else None
        seg["profit_share"] = seg["profit"] / total_profit if total_profit else None
        seg["empty"] = seg["customers"] == 0
    return {"threshold": threshold, "segments": segments, "loyal_segment": loyal_name}


# ---------------------------------------------------------------------------
# Report assembly


def build_findings_report(schema: StarSchema, catalog: MeasureCatalog) -> FindingsReport:
    """Run every diagnostic and compare against the reference aggregates."""
    fingerprint = dataset_fingerprint(schema, catalog)
    comparable = matches_reference_shape(fingerprint)
    calibrated = comparable and fingerprint.get("payment_source") == "fee-config:default"
    findings: list[Finding] = []

    kpis = run(schema, catalog, GroupQuery(measures=("Total Sales",)))
    findings.append(
        Finding(
            "dataset-orders",
            "distinct orders",
            float(fingerprint["orders"]),
            "count",
            float(ref.TOTAL_ORDERS) if comparable else None,
            0.0,
        )
    )
    findings.append(
        Finding(
            "dataset-customers",
            "distinct customers",
            float(fingerprint["customers"]),
            "count",
            float(ref.TOTAL_CUSTOMERS) if comparable else None,
            0.0,
        )
    )
    findings.append(
        Finding(
            "dataset-skus",
            "distinct product SKUs",
            float(fingerprint["products"]),
            "count",
            float(ref.TOTAL_SKUS) if comparable else None,
            0.0,
        )
    )
    findings.append(
        Finding(
            "total-sales",
            "total sales",
            kpis.total_row["Total Sales"],
            "usd",
            ref.TOTAL_SALES if comparable else None,
            0.005 * ref.TOTAL_SALES,
        )
    )

    findings.extend(category_margins(schema, catalog, comparable))

    markets = {row["market"]: row for row in market_matrix(schema, catalog)}
    for market in ("APAC", "EMEA"):
        row = markets.get(market)
        findings.append(
            Finding(
                f"market-{market.lower()}-sales",
                f"{market} sales",
                row["sales"] if row else None,
                "usd",
                ref.MARKET_SALES[market] if comparable and row else None,
                0.01 * ref.MARKET_SALES[market],
            )
        )
        findings.append(
            Finding(
                f"market-{market.lower()}-margin",
                f"{market} profit margin",
                row["margin"] if row else None,
                "share",
                ref.MARKET_MARGINS[market] if comparable and row else None,
                0.003,
            )
        )

    try:
        discounts = discount_threshold(schema, catalog)
        threshold_value = discounts["threshold"]
        above = [
            p
            for p in discounts["series"]
            if threshold_value is not None and p["discount"] > threshold_value
        ]
        detail = {"series": discounts["series"], "levels_above_threshold": len(above)}
    except NoDiscountVariation as err:
        threshold_value, detail = None, {"error": str(err)}
    findings.append(
        Finding(
            "discount-threshold",
            "last discount level with non-negative avg profit per order",
            threshold_value,
            "level",
            ref.DISCOUNT_THRESHOLD if comparable and threshold_value is not None else None,
            1e-9,
            detail=detail,
        )
    )

    losses = subcategory_losses(schema, catalog, "Furniture")
    by_sub = {row["sub_category"]: row for row in losses["sub_categories"]}
    tables = by_sub.get("Tables")
    has_losses = losses["loss_total"] > 0
    findings.append(
        Finding(
            "tables-loss-share",
            "Tables share of Furniture losses",
            tables["loss_share"] if tables and has_losses else None,
            "share",
            ref.TABLES_LOSS_SHARE if comparable and tables and has_losses else None,
            0.05,
        )
    )
    findings.append(
        Finding(
            "tables-sku-share",
            "Tables share of Furniture SKUs",
            tables["sku_share"] if tables else None,
            "share",
            ref.TABLES_SKU_SHARE if comparable and tables else None,
            0.03,
        )
    )

    shipping = shipping_subsidy(schema, catalog)
    findings.append(
        Finding(
            "shipping-subsidy-total",
            "total unrecovered shipping cost",
            shipping["total"],
            "usd",
            ref.SHIPPING_TOTAL_SUBSIDY if calibrated else None,
            0.01 * ref.SHIPPING_TOTAL_SUBSIDY,
            detail={
                "modes": shipping["modes"],
                "worst_mode": shipping["worst_mode"],
                "basis": fingerprint.get("payment_source"),
            },
        )
    )
    worst = shipping["worst_mode"]
    worst_finding = Finding(
        "shipping-subsidy-worst-mode",
        "largest per-mode subsidy (expected worst: First Class)",
        shipping["modes"][worst]["subsidy"] if worst else None,
        "usd",
        ref.FIRST_CLASS_SUBSIDY if calibrated and worst else None,
        0.01 * ref.FIRST_CLASS_SUBSIDY,
        detail={"mode": worst},
    )
    if calibrated and worst is not None and worst != ref.WORST_SHIP_MODE:
        worst_finding.force_mismatch()
    findings.append(worst_finding)

    loyalty = loyalty_concentration(schema, catalog)
    loyal = loyalty["segments"][loyalty["loyal_segment"]]
    findings.append(
        Finding(
            "loyalty-customer-share",
            f"customers with >= {loyalty['threshold']} orders, share of base",
            loyal["customer_share"],
            "share",
            ref.LOYAL_CUSTOMER_SHARE if comparable and not loyal["empty"] else None,
            0.05,
        )
    )
    findings.append(
        Finding(
            "loyalty-profit-share",
            "share of profit from the loyal segment",
            loyal["profit_share"],
            "share",
            ref.LOYAL_PROFIT_SHARE if comparable and not loyal["empty"] else None,
            0.05,
        )
    )

    return FindingsReport(
        fingerprint=fingerprint,
        findings=findings,
        generated_at=dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    )
