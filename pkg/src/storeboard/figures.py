"""Matplotlib renderings of the report diagnostics, written as PNG files.

The report command drops these next to its delimited output so a findings
run leaves both machine-readable numbers and the charts behind them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytics import (
    discount_threshold,
    loyalty_concentration,
    market_matrix,
    shipping_subsidy,
    subcategory_losses,
)
from .measures import MeasureCatalog
from .queries import GroupQuery, run
from .star import StarSchema

LOSS_RED = "#c0392b"
PROFIT_GREEN = "#27ae60"
PRIMARY_BLUE = "#2e6da4"
SECONDARY_GREY = "#95a5a6"

plt.rcParams.update(
    {
        "figure.figsize": (7.2, 4.2),
        "figure.dpi": 110,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "axes.grid": True,
        "grid.alpha": 0.25,
        "font.size": 9,
    }
)


def _save(fig, outdir: Path, name: str) -> Path:
    path = outdir / name
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def _sign_colors(values) -> list[str]:
    return [LOSS_RED if v < 0 else PROFIT_GREEN for v in values]


def fig_category_margins(schema, catalog, outdir: Path) -> Path:
    res = run(
        schema,
        catalog,
        GroupQuery(group_by=(("Product", "Category"),), measures=("Profit Margin %",)),
    )
    names = [r.keys[0] for r in res.rows]
    margins = [100 * (r.values["Profit Margin %"] or 0) for r in res.rows]
    fig, ax = plt.subplots()
    ax.bar(names, margins, color=_sign_colors(margins))
    overall = 100 * (res.total_row["Profit Margin %"] or 0)
    ax.axhline(overall, color=PRIMARY_BLUE, linestyle="--", linewidth=1)
    ax.annotate(f"overall {overall:.1f}%", (0.02, overall), xycoords=("axes fraction", "data"),
                va="bottom", color=PRIMARY_BLUE)
    for x, m in enumerate(margins):
        ax.annotate(f"{m:.2f}%", (x, m), ha="center", va="bottom")
    ax.set_ylabel("profit margin, %")
    ax.set_title("Profit margin by category")
    return _save(fig, outdir, "category_margins.png")


def fig_market_matrix(schema, catalog, outdir: Path) -> Path:
    rows = market_matrix(schema, catalog)
    fig, ax = plt.subplots()
    sales = np.array([r["sales"] or 0 for r in rows]) / 1e6
    margins = np.array([100 * (r["margin"] or 0) for r in rows])
    orders = np.array([r["order_count"] or 0 for r in rows])
    sizes = 2500 * orders / orders.max() if orders.max() else 100
    colors = [PROFIT_GREEN if m >= 10 else (LOSS_RED if m < 8 else SECONDARY_GREY) for m in margins]
    ax.scatter(sales, margins, s=sizes, c=colors, alpha=0.6, edgecolors="none")
    for r, x, y in zip(rows, sales, margins):
        weight = "bold" if r["market"] == "APAC" else "normal"
        ax.annotate(r["market"], (x, y), ha="center", fontweight=weight)
    apac = next((i for i, r in enumerate(rows) if r["market"] == "APAC"), None)
    if apac is not None:
        ax.scatter([sales[apac]], [margins[apac]], s=float(sizes[apac]) if np.ndim(sizes) else sizes,
                   facecolors="none", edgecolors=PRIMARY_BLUE, linewidths=2)
    ax.set_xlabel("sales, $M")
    ax.set_ylabel("profit margin, %")
    ax.set_title("Market performance (bubble area = orders)")
    return _save(fig, outdir, "market_matrix.png")


def fig_discount_threshold(schema, catalog, outdir: Path) -> Path:
    data = discount_threshold(schema, catalog)
    levels = [p["discount"] for p in data["series"]]
    sales = [p["total_sales"] / 1e6 for p in data["series"]]
    avg = [p["avg_profit_per_order"] for p in data["series"]]
    x = np.arange(len(levels))
    fig, ax = plt.subplots()
    ax.bar(x, sales, color=PRIMARY_BLUE, alpha=0.5, label="total sales, $M")
    ax.set_ylabel("total sales, $M", color=PRIMARY_BLUE)
    ax2 = ax.twinx()
    ax2.plot(x, avg, color=LOSS_RED, marker="o", label="avg profit per order, $")
    ax2.axhline(0, color=SECONDARY_GREY, linewidth=1)
    ax2.set_ylabel("avg profit per order, $", color=LOSS_RED)
    ax2.spines.right.set_visible(True)
    ax2.grid(False)
    if data["threshold"] is not None:
        idx = levels.index(data["threshold"])
        ax.axvline(idx + 0.5, color=LOSS_RED, linestyle=":", linewidth=1.5)
        ax.annotate(f"threshold {data['threshold']:.0%}", (idx + 0.55, max(sales)),
                    color=LOSS_RED, va="top")
    ax.set_xticks(x, [f"{lv:.0%}" for lv in levels])
    ax.set_xlabel("discount level")
    ax.set_title("Discount level vs sales and profit per order")
    return _save(fig, outdir, "discount_threshold.png")


def fig_shipping_subsidy(schema, catalog, outdir: Path) -> Path:
    data = shipping_subsidy(schema, catalog)
    modes = sorted(data["modes"], key=lambda m: -(data["modes"][m]["subsidy"] or 0))
    values = [-(data["modes"][m]["subsidy"] or 0) / 1e6 for m in modes]
    fig, ax = plt.subplots()
    ax.bar(modes, values, color=[LOSS_RED if v < 0 else PROFIT_GREEN for v in values])
    for x, (m, v) in enumerate(zip(modes, values)):
        ax.annotate(f"{v:+.2f}M", (x, v), ha="center", va="top")
    total = data["total"] or 0
    ax.set_ylabel("recovered minus cost, $M")
    ax.set_title(f"Shipping subsidy by mode (total unrecovered ${total / 1e6:.2f}M)")
    return _save(fig, outdir, "shipping_subsidy.png")


def fig_subcategory_losses(schema, catalog, outdir: Path, category: str = "Furniture") -> Path:
    data = subcategory_losses(schema, catalog, category)
    rows = sorted(data["sub_categories"], key=lambda r: r["net_profit"])
    names = [r["sub_category"] for r in rows]
    nets = [r["net_profit"] / 1e3 for r in rows]
    fig, ax = plt.subplots()
    ax.barh(names, nets, color=_sign_colors(nets))
    for y, r in enumerate(rows):
        if r["loss_share"]:
            ax.annotate(
                f"{r['loss_share']:.0%} of losses, {r['sku_share']:.0%} of SKUs",
                (nets[y], y), va="center", ha="right" if nets[y] < 0 else "left",
            )
    ax.axvline(0, color=SECONDARY_GREY, linewidth=1)
    ax.set_xlabel("net profit, $k")
    ax.set_title(f"{category}: profit and loss by sub-category")
    return _save(fig, outdir, "subcategory_losses.png")


def fig_loyalty_concentration(schema, catalog, outdir: Path) -> Path:
    data = loyalty_concentration(schema, catalog)
    loyal = data["loyal_segment"]
    segments = [loyal] + [s for s in data["segments"] if s != loyal]
    metrics = ("customer_share", "profit_share")
    fig, ax = plt.subplots()
    bottoms = [0.0, 0.0]
    colors = {loyal: PROFIT_GREEN}
    for seg in segments:
        vals = [100 * (data["segments"][seg][m] or 0) for m in metrics]
        ax.bar(["share of customers", "share of profit"], vals, bottom=bottoms,
               color=colors.get(seg, SECONDARY_GREY), label=seg)
        for i, v in enumerate(vals):
            if v > 5:
                ax.annotate(f"{v:.0f}%", (i, bottoms[i] + v / 2), ha="center", va="center")
        bottoms = [b + v for b, v in zip(bottoms, vals)]
    ax.set_ylabel("%")
    ax.set_title(f"Customer concentration ({loyal}: >= {data['threshold']} orders)")
    ax.legend(loc="upper center", ncols=2, frameon=False)
    return _save(fig, outdir, "loyalty_concentration.png")


def render_report_figures(schema: StarSchema, catalog: MeasureCatalog, outdir) -> list[Path]:
    """Render every report figure into outdir; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return [
        fig_category_margins(schema, catalog, outdir),
        fig_market_matrix(schema, catalog, outdir),
        fig_discount_threshold(schema, catalog, outdir),
        fig_shipping_subsidy(schema, catalog, outdir),
        fig_subcategory_losses(schema, catalog, outdir),
        fig_loyalty_concentration(schema, catalog, outdir),
    ]
