"""Deterministic generator for the bundled four-year retail dataset.

The workspace ships no raw Global Superstore file, so this module builds
one: ~51k order lines over 25,035 orders, 1,590 customers, 10,292 SKUs,
seven markets, three categories, calibrated so every reference aggregate
in ``reference.py`` is reproduced (counts exactly, money figures inside
half their stated tolerance).

Calibration works on a (sub-category x market x discount-level) cell grid.
Cell sales are an exact product of the three share vectors, and cell profit
is sales times an additive margin (sub-category margin + market effect +
discount effect). Because the market and discount effects are sales-weighted
to zero, every marginal aggregate lands exactly on target before rounding;
per-line noise is zero-sum inside each cell, so it never moves the sums.

The generator self-checks all targets and raises CalibrationError rather
than silently emitting a dataset that would fail the report.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import reference as ref
from .errors import CalibrationError

DEFAULT_SEED = 20140101

N_LINES = 51_290

# --------------------------------------------------------------------------
# Composition tables

# Technology sales are pinned; Furniture/Office fall out of the margin solve.
TECHNOLOGY_SALES = 4_740_000.0

# (name, sales share within category, SKU count); SKU counts total 10,292
# and Tables hold 23% of the 2,200 Furniture SKUs.
SUBCATS = {
    "Furniture": (
        ("Chairs", 0.36, 620),
        ("Tables", 0.24, 506),
        ("Bookcases", 0.22, 480),
        ("Furnishings", 0.18, 594),
    ),
    "Technology": (
        ("Phones", 0.33, 980),
        ("Accessories", 0.26, 940),
        ("Machines", 0.22, 680),
        ("Copiers", 0.19, 680),
    ),
    "Office Supplies": (
        ("Binders", 0.17, 900),
        ("Paper", 0.14, 880),
        ("Storage", 0.17, 760),
        ("Appliances", 0.13, 560),
        ("Art", 0.09, 640),
        ("Envelopes", 0.07, 352),
        ("Labels", 0.06, 380),
        ("Fasteners", 0.03, 140),
        ("Supplies", 0.14, 200),
    ),
}

# Furniture loses money in three sub-categories; the split fixes the
# Tables share of total category losses at 44% with Tables the worst.
FURNITURE_LOSS_POOL = 280_000.0
FURNITURE_LOSS_SPLIT = {"Tables": 0.44, "Bookcases": 0.31, "Furnishings": 0.25}

# Margin shapes inside the profitable categories (offset-calibrated later).
MARGIN_SHAPES = {
    "Technology": {"Phones": 0.10, "Accessories": 0.14, "Machines": 0.105, "Copiers": 0.25},
    "Office Supplies": {
        "Binders": 0.15,
        "Paper": 0.22,
        "Storage": 0.08,
        "Appliances": 0.11,
        "Art": 0.10,
        "Envelopes": 0.18,
        "Labels": 0.20,
        "Fasteners": 0.12,
        "Supplies": 0.09,
    },
}

# name -> (sales, margin); None margins absorb the residual profit
MARKETS = {
    "APAC": (ref.MARKET_SALES["APAC"], ref.MARKET_MARGINS["APAC"]),
    "EMEA": (ref.MARKET_SALES["EMEA"], ref.MARKET_MARGINS["EMEA"]),
    "EU": (2_275_000.0, 0.145),
    "US": (1_896_000.0, 0.135),
    "LATAM": (1_264_000.0, 0.12),
    "Africa": (505_600.0, 0.09),
    "Canada": (None, None),  # residual sales and profit
}

# (level, sales share, margin); positive margins are scaled so the
# sales-weighted mean hits the overall margin, negatives stay fixed.
DISCOUNT_LEVELS = (
    (0.00, 0.250, 0.30),
    (0.10, 0.220, 0.20),
    (0.15, 0.160, 0.13),
    (0.20, 0.140, 0.03),
    (0.25, 0.060, -0.04),
    (0.30, 0.050, -0.10),
    (0.40, 0.045, -0.22),
    (0.50, 0.035, -0.34),
    (0.60, 0.020, -0.46),
    (0.70, 0.015, -0.58),
    (0.80, 0.005, -0.70),
)

# mode -> (order share, aggregate subsidy target, ship-day range, cost factor)
SHIP_MODES = {
    "Standard Class": (0.60, 420_000.0, (3, 7), 1.0),
    "Second Class": (0.20, 340_000.0, (2, 4), 1.3),
    "First Class": (0.15, 470_000.0, (1, 2), 1.8),
    "Same Day": (0.05, 120_000.0, (0, 0), 2.2),
}

YEAR_WEIGHTS = {2011: 0.16, 2012: 0.21, 2013: 0.27, 2014: 0.36}
MONTH_WEIGHTS = (0.055, 0.05, 0.07, 0.065, 0.075, 0.085, 0.07, 0.085, 0.095, 0.08, 0.115, 0.155)

GEOGRAPHY = {
    "APAC": {
        "Australia": ("Oceania", "AU", ("Sydney", "Melbourne", "Brisbane", "Perth")),
        "China": ("North Asia", "CN", ("Shanghai", "Beijing", "Shenzhen", "Chengdu")),
        "India": ("Central Asia", "IN", ("Mumbai", "Delhi", "Bangalore", "Pune")),
        "Japan": ("North Asia", "JP", ("Tokyo", "Osaka", "Nagoya")),
        "Indonesia": ("Southeast Asia", "ID", ("Jakarta", "Surabaya", "Medan")),
    },
    "EU": {
        "France": ("Central", "FR", ("Paris", "Lyon", "Marseille", "Toulouse")),
        "Germany": ("Central", "DE", ("Berlin", "Hamburg", "Munich", "Cologne")),
        "United Kingdom": ("North", "GB", ("London", "Manchester", "Leeds", "Glasgow")),
        "Italy": ("South", "IT", ("Rome", "Milan", "Naples")),
        "Spain": ("South", "ES", ("Madrid", "Barcelona", "Valencia")),
    },
    "US": {
        "United States": ("West", "US", ("Los Angeles", "Seattle", "San Francisco", "Phoenix"))
    },
    "EMEA": {
        "Turkey": ("Middle East", "TR", ("Istanbul", "Ankara", "Izmir")),
        "Saudi Arabia": ("Middle East", "SA", ("Riyadh", "Jeddah")),
        "Egypt": ("North Africa", "EG", ("Cairo", "Alexandria", "Giza")),
        "Russia": ("Eastern Europe", "RU", ("Moscow", "Saint Petersburg", "Kazan")),
    },
    "LATAM": {
        "Brazil": ("South America", "BR", ("Sao Paulo", "Rio de Janeiro", "Brasilia")),
        "Mexico": ("Central America", "MX", ("Mexico City", "Guadalajara", "Monterrey")),
        "Argentina": ("South America", "AR", ("Buenos Aires", "Cordoba")),
        "Colombia": ("South America", "CO", ("Bogota", "Medellin")),
    },
    "Africa": {
        "South Africa": ("Southern Africa", "ZA", ("Johannesburg", "Cape Town", "Durban")),
        "Nigeria": ("Western Africa", "NG", ("Lagos", "Abuja")),
        "Kenya": ("Eastern Africa", "KE", ("Nairobi", "Mombasa")),
    },
    "Canada": {"Canada": ("Canada", "CA", ("Toronto", "Vancouver", "Montreal", "Calgary"))},
}

# Extra US cities live in other regions so Region varies inside the country.
US_REGIONS = {
    "Los Angeles": "West",
    "Seattle": "West",
    "San Francisco": "West",
    "Phoenix": "West",
    "Chicago": "Central",
    "Dallas": "Central",
    "Houston": "Central",
    "New York City": "East",
    "Philadelphia": "East",
    "Boston": "East",
    "Atlanta": "South",
    "Miami": "South",
}

BRANDS = (
    "Northwind", "Brightline", "Ortega", "Calder", "Maxwell", "Juniper", "Halsted",
    "Vertex", "Pinnacle", "Redwood", "Atlas", "Meridian", "Clearview", "Summit",
    "Lakeside", "Ironwood", "Beacon", "Cascade", "Harbor", "Quill",
)
SUBCAT_NOUNS = {
    "Chairs": "Task Chair", "Tables": "Conference Table", "Bookcases": "Bookcase",
    "Furnishings": "Desk Lamp", "Phones": "Smart Phone", "Accessories": "Keyboard",
    "Machines": "Label Maker", "Copiers": "Copier", "Binders": "Ring Binder",
    "Paper": "Multipurpose Paper", "Storage": "Storage Drawer", "Appliances": "Air Purifier",
    "Art": "Sketch Pencils", "Envelopes": "Catalog Envelope", "Labels": "Address Labels",
    "Fasteners": "Paper Clips", "Supplies": "Letter Opener",
}
PRODUCT_STYLES = ("Standard", "Deluxe", "Compact", "Pro Series", "Classic", "Eco", "Heavy-Duty", "Slim")

FIRST_NAMES = (
    "Aaron", "Alice", "Brian", "Carla", "Daniel", "Elena", "Felix", "Grace", "Hector",
    "Irene", "Jonas", "Karen", "Liam", "Maria", "Nadia", "Oscar", "Priya", "Quentin",
    "Rosa", "Samuel", "Tara", "Umar", "Vera", "Walter", "Ximena", "Yusuf", "Zoe",
    "Bennett", "Clara", "Dmitri", "Estela", "Farid", "Gwen", "Hana", "Ivan", "Jade",
    "Kofi", "Lena", "Marco", "Nora",
)
LAST_NAMES = (
    "Adler", "Baker", "Chen", "Diaz", "Evans", "Fischer", "Garcia", "Haines", "Ibrahim",
    "Jensen", "Kim", "Lopez", "Mason", "Novak", "Okafor", "Park", "Quinn", "Rossi",
    "Silva", "Tanaka", "Unger", "Vargas", "Weber", "Xu", "Yilmaz", "Zhang", "Andrade",
    "Burton", "Costa", "Dubois", "Eriksen", "Fontaine", "Gupta", "Hassan", "Iverson",
    "Jonsson", "Kaur", "Larsen", "Moreau", "Nash",
)
SEGMENTS = ("Consumer", "Corporate", "Home Office")
SEGMENT_WEIGHTS = (0.51, 0.31, 0.18)

CSV_HEADER = (
    "Order ID", "Order Date", "Ship Date", "Ship Mode", "Customer ID", "Customer Name",
    "Segment", "City", "Country", "Market", "Region", "Product ID", "Category",
    "Sub-Category", "Product Name", "Sales", "Quantity", "Discount", "Profit",
    "Shipping Cost", "Order Priority",
)


def load_fee_config() -> dict:
    text = resources.files("storeboard.data").joinpath("shipping_fees.json").read_text("utf-8")
    return json.loads(text)


# --------------------------------------------------------------------------
# Target solving


@dataclass(frozen=True)
class SubcatTarget:
    name: str
    category: str
    sales: float
    margin: float
    sku_count: int


def solve_targets():
    """Exact sales/margin targets for sub-categories, markets, and levels."""
    total = ref.TOTAL_SALES
    m_f = ref.CATEGORY_MARGINS["Furniture"]
    m_t = ref.CATEGORY_MARGINS["Technology"]
    m_o = ref.CATEGORY_MARGINS["Office Supplies"]
    t = TECHNOLOGY_SALES
    # furniture sales from: f*m_f + t*m_t + (total-f-t)*m_o = total*overall
    f = (total * (ref.OVERALL_MARGIN - m_o) - t * (m_t - m_o)) / (m_f - m_o)
    o = total - t - f
    category_sales = {"Furniture": f, "Technology": t, "Office Supplies": o}

    subcats: list[SubcatTarget] = []
    for category, rows in SUBCATS.items():
        cat_sales = category_sales[category]
        cat_profit = ref.CATEGORY_MARGINS[category] * cat_sales
        if category == "Furniture":
            nets = {name: -FURNITURE_LOSS_POOL * share for name, share in FURNITURE_LOSS_SPLIT.items()}
            nets["Chairs"] = cat_profit + FURNITURE_LOSS_POOL
            for name, share, skus in rows:
                sales = cat_sales * share
                subcats.append(SubcatTarget(name, category, sales, nets[name] / sales, skus))
        else:
            shape = MARGIN_SHAPES[category]
            weighted = sum(share * shape[name] for name, share, _ in rows)
            offset = ref.CATEGORY_MARGINS[category] - weighted
            for name, share, skus in rows:
                subcats.append(
                    SubcatTarget(name, category, cat_sales * share, shape[name] + offset, skus)
                )

    # markets: residual row absorbs leftover sales and profit
    total_profit = ref.OVERALL_MARGIN * total
    fixed_sales = sum(s for s, _ in MARKETS.values() if s is not None)
    fixed_profit = sum(s * m for s, m in MARKETS.values() if s is not None)
    market_rows = []
    for name, (sales, margin) in MARKETS.items():
        if sales is None:
            sales = total - fixed_sales
            margin = (total_profit - fixed_profit) / sales
        market_rows.append((name, sales, margin))

    # discount levels: scale positive margins to balance the fixed negatives
    neg = sum(share * margin for _, share, margin in DISCOUNT_LEVELS if margin < 0)
    pos = sum(share * margin for _, share, margin in DISCOUNT_LEVELS if margin >= 0)
    scale = (ref.OVERALL_MARGIN - neg) / pos
    level_rows = [
        (level, share, margin * scale if margin >= 0 else margin)
        for level, share, margin in DISCOUNT_LEVELS
    ]
    return subcats, market_rows, level_rows


def _largest_remainder_min1(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation proportional to weights, each cell at least 1."""
    quotas = weights / weights.sum() * total
    counts = np.maximum(1, np.floor(quotas).astype(np.int64))
    excess = int(counts.sum()) - total
    if excess > 0:
        order = np.argsort(-(counts - quotas))
        for idx in order:
            if excess == 0:
                break
            if counts[idx] > 1:
                counts[idx] -= 1
                excess -= 1
    elif excess < 0:
        order = np.argsort(-(quotas - counts))
        for idx in order[: -excess]:
            counts[idx] += 1
    assert counts.sum() == total and (counts >= 1).all()
    return counts


# --------------------------------------------------------------------------
# Generation


@dataclass
class Dataset:
    """Generated line/order/customer arrays plus the CSV writer."""

    header: tuple[str, ...]
    rows: list[tuple]
    summary: dict

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header)
            writer.writerows(self.rows)


def _ddmmyyyy(d: dt.date) -> str:
    return f"{d.day:02d}-{d.month:02d}-{d.year}"


def generate(seed: int = DEFAULT_SEED) -> Dataset:
    rng = np.random.default_rng(seed)
    subcats, market_rows, level_rows = solve_targets()
    n_sub, n_mkt, n_lvl = len(subcats), len(market_rows), len(level_rows)

    sub_share = np.array([s.sales / ref.TOTAL_SALES for s in subcats])
    mkt_share = np.array([sales / ref.TOTAL_SALES for _, sales, _ in market_rows])
    lvl_share = np.array([share for _, share, _ in level_rows])
    sub_margin = np.array([s.margin for s in subcats])
    mkt_effect = np.array([margin - ref.OVERALL_MARGIN for _, _, margin in market_rows])
    lvl_effect = np.array([margin - ref.OVERALL_MARGIN for _, _, margin in level_rows])

    cell_share = sub_share[:, None, None] * mkt_share[None, :, None] * lvl_share[None, None, :]
    cell_margin = (
        sub_margin[:, None, None] + mkt_effect[None, :, None] + lvl_effect[None, None, :]
    )
    counts = _largest_remainder_min1(cell_share.ravel(), N_LINES).reshape(cell_share.shape)

    # per-line arrays
    line_sub = np.repeat(np.arange(n_sub), counts.sum(axis=(1, 2)))
    line_mkt = np.empty(N_LINES, dtype=np.int64)
    line_lvl = np.empty(N_LINES, dtype=np.int64)
    line_sales = np.empty(N_LINES)
    line_profit = np.empty(N_LINES)
    pos = 0
    for j in range(n_sub):
        for k in range(n_mkt):
            for l in range(n_lvl):
                n = int(counts[j, k, l])
                cell_sales = cell_share[j, k, l] * ref.TOTAL_SALES
                raw = rng.lognormal(mean=0.0, sigma=0.9, size=n)
                sales = raw / raw.sum() * cell_sales
                noise = rng.normal(0.0, 0.35, size=n) * sales
                noise -= sales * (noise.sum() / sales.sum())
                profit = cell_margin[j, k, l] * sales + noise
                sl = slice(pos, pos + n)
                line_mkt[sl] = k
                line_lvl[sl] = l
                line_sales[sl] = sales
                line_profit[sl] = profit
                pos += n
    assert pos == N_LINES

    line_qty = np.minimum(rng.geometric(0.42, size=N_LINES), 14)

    # SKU assignment: every SKU appears at least once inside its sub-category
    sku_offsets = np.cumsum([0] + [s.sku_count for s in subcats])
    line_sku = np.empty(N_LINES, dtype=np.int64)
    for j, sub in enumerate(subcats):
        idx = np.flatnonzero(line_sub == j)
        perm = rng.permutation(idx)
        k = sub.sku_count
        if len(idx) < k:
            raise CalibrationError(f"{sub.name}: {len(idx)} lines cannot cover {k} SKUs")
        line_sku[perm[:k]] = sku_offsets[j] + np.arange(k)
        line_sku[perm[k:]] = sku_offsets[j] + rng.integers(0, k, size=len(idx) - k)

    # ------------------------------------------------------------------
    # Orders: market-consistent groups of lines
    market_names = [name for name, _, _ in market_rows]
    lines_per_market = np.bincount(line_mkt, minlength=n_mkt)
    orders_per_market = _largest_remainder_min1(
        lines_per_market.astype(np.float64), ref.TOTAL_ORDERS
    )
    order_market = np.repeat(np.arange(n_mkt), orders_per_market)
    line_order = np.empty(N_LINES, dtype=np.int64)
    order_start = np.cumsum(np.concatenate(([0], orders_per_market)))
    for k in range(n_mkt):
        o_k = int(orders_per_market[k])
        n_k = int(lines_per_market[k])
        sizes = np.ones(o_k, dtype=np.int64)
        sizes += rng.multinomial(n_k - o_k, np.full(o_k, 1.0 / o_k))
        positions = rng.permutation(np.flatnonzero(line_mkt == k))
        bounds = np.cumsum(np.concatenate(([0], sizes)))
        for o in range(o_k):
            line_order[positions[bounds[o] : bounds[o + 1]]] = order_start[k] + o

    n_orders = int(ref.TOTAL_ORDERS)
    years = np.array(list(YEAR_WEIGHTS))
    order_year = rng.choice(years, size=n_orders, p=list(YEAR_WEIGHTS.values()))
    order_month = rng.choice(np.arange(1, 13), size=n_orders, p=MONTH_WEIGHTS)
    month_len = np.array([31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31])
    order_day = rng.integers(1, month_len[order_month - 1] + 1)

    mode_names = list(SHIP_MODES)
    order_mode = rng.choice(
        np.arange(len(mode_names)), size=n_orders, p=[SHIP_MODES[m][0] for m in mode_names]
    )
    ship_lo = np.array([SHIP_MODES[m][2][0] for m in mode_names])
    ship_hi = np.array([SHIP_MODES[m][2][1] for m in mode_names])
    order_ship_days = rng.integers(ship_lo[order_mode], ship_hi[order_mode] + 1)

    # geography per order
    order_country = np.empty(n_orders, dtype=object)
    order_city = np.empty(n_orders, dtype=object)
    order_region = np.empty(n_orders, dtype=object)
    order_ccode = np.empty(n_orders, dtype=object)
    for k, market in enumerate(market_names):
        countries = list(GEOGRAPHY[market])
        rows_k = np.flatnonzero(order_market == k)
        weights = np.linspace(1.0, 0.4, len(countries))
        weights /= weights.sum()
        picks = rng.choice(np.arange(len(countries)), size=len(rows_k), p=weights)
        for o, c in zip(rows_k, picks):
            country = countries[c]
            region, code, cities = GEOGRAPHY[market][country]
            if market == "US":
                city = list(US_REGIONS)[rng.integers(0, len(US_REGIONS))]
                region = US_REGIONS[city]
            else:
                city = cities[rng.integers(0, len(cities))]
            order_country[o] = country
            order_city[o] = city
            order_region[o] = region
            order_ccode[o] = code

    order_ids = np.array(
        [f"{order_ccode[o]}-{order_year[o]}-{100000 + o}" for o in range(n_orders)], dtype=object
    )

    # ------------------------------------------------------------------
    # Shipping cost: scaled per mode so cost - fees hits the subsidy targets
    fee_config = load_fee_config()["modes"]
    line_mode = order_mode[line_order]
    flat = np.array([fee_config[m]["flat_fee"] for m in mode_names])
    per_unit = np.array([fee_config[m]["per_unit_fee"] for m in mode_names])
    line_fee = flat[line_mode] + per_unit[line_mode] * line_qty
    cost_factor = np.array([SHIP_MODES[m][3] for m in mode_names])
    raw_cost = (1.5 + 0.055 * line_sales + 0.8 * line_qty) * rng.lognormal(0.0, 0.35, N_LINES)
    raw_cost *= cost_factor[line_mode]
    line_cost = np.empty(N_LINES)
    for mi, mode in enumerate(mode_names):
        sel = line_mode == mi
        target = line_fee[sel].sum() + SHIP_MODES[mode][1]
        line_cost[sel] = raw_cost[sel] * (target / raw_cost[sel].sum())

    # ------------------------------------------------------------------
    # Customers: 879 Super Loyal (>= threshold orders) holding ~92% of profit
    loyalty = json.loads(
        resources.files("storeboard.data").joinpath("loyalty.json").read_text("utf-8")
    )
    threshold = int(loyalty["super_loyal_min_orders"])
    n_loyal = ref.LOYAL_CUSTOMER_COUNT
    n_casual = ref.TOTAL_CUSTOMERS - n_loyal
    casual_counts = 1 + rng.binomial(threshold - 2, 0.46, size=n_casual)
    extras = n_orders - int(casual_counts.sum()) - n_loyal * threshold
    if extras < 0:
        raise CalibrationError("loyalty order budget infeasible; lower casual draw")
    loyal_counts = threshold + rng.multinomial(extras, np.full(n_loyal, 1.0 / n_loyal))

    order_profit = np.bincount(line_order, weights=line_profit, minlength=n_orders)
    total_profit = order_profit.sum()
    perm = rng.permutation(n_orders)
    n_loyal_orders = int(loyal_counts.sum())
    loyal_orders = perm[:n_loyal_orders].copy()
    casual_orders = perm[n_loyal_orders:].copy()
    share = order_profit[loyal_orders].sum() / total_profit
    loyal_sorted = loyal_orders[np.argsort(order_profit[loyal_orders])]
    casual_sorted = casual_orders[np.argsort(-order_profit[casual_orders])]
    n_swap = min(len(loyal_sorted), len(casual_sorted))
    gains = order_profit[casual_sorted[:n_swap]] - order_profit[loyal_sorted[:n_swap]]
    shares = share + np.concatenate(([0.0], np.cumsum(gains))) / total_profit
    k = int(np.argmin(np.abs(shares - ref.LOYAL_PROFIT_SHARE)))
    if k:
        swap_l = loyal_sorted[:k].copy()
        swap_c = casual_sorted[:k].copy()
        loyal_set = set(loyal_orders.tolist()) - set(swap_l.tolist()) | set(swap_c.tolist())
        loyal_orders = np.array(sorted(loyal_set), dtype=np.int64)
        casual_orders = np.array(sorted(set(range(n_orders)) - loyal_set), dtype=np.int64)

    # stable customer identities
    name_pairs = [(f, l) for f in FIRST_NAMES for l in LAST_NAMES]
    rng.shuffle(name_pairs)
    name_pairs = name_pairs[: ref.TOTAL_CUSTOMERS]
    cust_ids = np.array(
        [f"{f[0]}{l[0]}-{10000 + i}" for i, (f, l) in enumerate(name_pairs)], dtype=object
    )
    cust_names = np.array([f"{f} {l}" for f, l in name_pairs], dtype=object)
    cust_segment = rng.choice(np.array(SEGMENTS, dtype=object), size=ref.TOTAL_CUSTOMERS, p=SEGMENT_WEIGHTS)

    order_customer = np.empty(n_orders, dtype=np.int64)
    loyal_perm = rng.permutation(loyal_orders)
    bounds = np.cumsum(np.concatenate(([0], loyal_counts)))
    for i in range(n_loyal):
        order_customer[loyal_perm[bounds[i] : bounds[i + 1]]] = i
    casual_perm = rng.permutation(casual_orders)
    bounds = np.cumsum(np.concatenate(([0], casual_counts)))
    for i in range(n_casual):
        order_customer[casual_perm[bounds[i] : bounds[i + 1]]] = n_loyal + i

    # ------------------------------------------------------------------
    # Product identities
    sku_names = []
    sku_ids = []
    for j, sub in enumerate(subcats):
        cat3 = sub.category.replace(" ", "")[:3].upper()
        sub2 = sub.name[:2].upper()
        for i in range(sub.sku_count):
            sku_ids.append(f"{cat3}-{sub2}-{10_000_000 + sku_offsets[j] + i}")
            brand = BRANDS[(sku_offsets[j] + i) % len(BRANDS)]
            style = PRODUCT_STYLES[(sku_offsets[j] + i) % len(PRODUCT_STYLES)]
            sku_names.append(f"{brand} {SUBCAT_NOUNS[sub.name]}, {style}")
    sku_ids = np.array(sku_ids, dtype=object)
    sku_names = np.array(sku_names, dtype=object)

    # ------------------------------------------------------------------
    # Rows
    level_values = np.array([lvl for lvl, _, _ in level_rows])
    priorities = np.array(["Low", "Medium", "High", "Critical"], dtype=object)
    line_priority = rng.choice(priorities, size=N_LINES, p=[0.15, 0.55, 0.22, 0.08])

    rows = []
    for i in range(N_LINES):
        o = int(line_order[i])
        date = dt.date(int(order_year[o]), int(order_month[o]), int(order_day[o]))
        ship = date + dt.timedelta(days=int(order_ship_days[o]))
        j = int(line_sub[i])
        cust = int(order_customer[o])
        rows.append(
            (
                order_ids[o],
                _ddmmyyyy(date),
                _ddmmyyyy(ship),
                mode_names[int(line_mode[i])],
                cust_ids[cust],
                cust_names[cust],
                cust_segment[cust],
                order_city[o],
                order_country[o],
                market_names[int(line_mkt[i])],
                order_region[o],
                sku_ids[int(line_sku[i])],
                subcats[j].category,
                subcats[j].name,
                sku_names[int(line_sku[i])],
                f"{line_sales[i]:.2f}",
                int(line_qty[i]),
                f"{level_values[int(line_lvl[i])]:g}",
                f"{line_profit[i]:.2f}",
                f"{line_cost[i]:.2f}",
                line_priority[i],
            )
        )
    order_rows = rng.permutation(N_LINES)
    rows = [rows[i] for i in order_rows]

    summary = _self_check(
        subcats,
        market_rows,
        level_rows,
        line_sub,
        line_mkt,
        line_lvl,
        line_order,
        line_sales,
        line_profit,
        line_cost,
        line_fee,
        line_mode,
        mode_names,
        line_sku,
        order_customer,
        loyal_orders,
        threshold,
    )
    return Dataset(CSV_HEADER, rows, summary)


def _self_check(
    subcats,
    market_rows,
    level_rows,
    line_sub,
    line_mkt,
    line_lvl,
    line_order,
    line_sales,
    line_profit,
    line_cost,
    line_fee,
    line_mode,
    mode_names,
    line_sku,
    order_customer,
    loyal_orders,
    threshold,
) -> dict:
    """Verify every reference target before the dataset leaves the generator."""

    def fail(msg):
        raise CalibrationError(msg)

    total_sales = line_sales.sum()
    total_profit = line_profit.sum()
    if abs(total_sales - ref.TOTAL_SALES) > 0.0025 * ref.TOTAL_SALES:
        fail(f"total sales {total_sales:,.0f} off target")
    margin = total_profit / total_sales
    if abs(margin - ref.OVERALL_MARGIN) > 0.0015:
        fail(f"overall margin {margin:.4f} off target")

    cat_of_sub = np.array([s.category for s in subcats], dtype=object)
    for category, want in ref.CATEGORY_MARGINS.items():
        sel = np.isin(line_sub, np.flatnonzero(cat_of_sub == category))
        got = line_profit[sel].sum() / line_sales[sel].sum()
        if abs(got - want) > 0.001:
            fail(f"{category} margin {got:.4f} != {want}")

    market_names = [name for name, _, _ in market_rows]
    for market in ("APAC", "EMEA"):
        k = market_names.index(market)
        sel = line_mkt == k
        sales = line_sales[sel].sum()
        got_margin = line_profit[sel].sum() / sales
        if abs(sales - ref.MARKET_SALES[market]) > 0.005 * ref.MARKET_SALES[market]:
            fail(f"{market} sales {sales:,.0f} off target")
        if abs(got_margin - ref.MARKET_MARGINS[market]) > 0.0015:
            fail(f"{market} margin {got_margin:.4f} off target")

    for l, (level, _, _) in enumerate(level_rows):
        s = line_profit[line_lvl == l].sum()
        if level <= ref.DISCOUNT_THRESHOLD and s <= 0:
            fail(f"discount level {level} not profitable")
        if level > ref.DISCOUNT_THRESHOLD and s >= 0:
            fail(f"discount level {level} not losing money")

    sub_names = [s.name for s in subcats]
    sub_profit = np.bincount(line_sub, weights=line_profit, minlength=len(subcats))
    furn = [i for i, s in enumerate(subcats) if s.category == "Furniture"]
    losses = {sub_names[i]: max(0.0, -sub_profit[i]) for i in furn}
    loss_total = sum(losses.values())
    tables_share = losses["Tables"] / loss_total
    if abs(tables_share - ref.TABLES_LOSS_SHARE) > 0.02:
        fail(f"Tables loss share {tables_share:.3f} off target")
    if int(np.argmin(sub_profit)) != sub_names.index("Tables"):
        fail("Tables is not the worst sub-category")
    furn_skus = sum(subcats[i].sku_count for i in furn)
    tables_sku_share = subcats[sub_names.index("Tables")].sku_count / furn_skus
    if abs(tables_sku_share - ref.TABLES_SKU_SHARE) > 0.01:
        fail(f"Tables SKU share {tables_sku_share:.3f} off target")

    subsidies = {}
    for mi, mode in enumerate(mode_names):
        sel = line_mode == mi
        subsidies[mode] = float(line_cost[sel].sum() - line_fee[sel].sum())
        if subsidies[mode] <= 0:
            fail(f"{mode} recovered its costs; every mode must run at a loss")
    total_subsidy = sum(subsidies.values())
    if abs(total_subsidy - ref.SHIPPING_TOTAL_SUBSIDY) > 0.005 * ref.SHIPPING_TOTAL_SUBSIDY:
        fail(f"total subsidy {total_subsidy:,.0f} off target")
    if max(subsidies, key=subsidies.get) != ref.WORST_SHIP_MODE:
        fail("worst shipping mode is not First Class")

    n_orders = int(line_order.max()) + 1
    order_profit = np.bincount(line_order, weights=line_profit, minlength=n_orders)
    loyal_mask = np.zeros(n_orders, dtype=bool)
    loyal_mask[loyal_orders] = True
    loyal_profit_share = order_profit[loyal_mask].sum() / order_profit.sum()
    if abs(loyal_profit_share - ref.LOYAL_PROFIT_SHARE) > 0.01:
        fail(f"loyal profit share {loyal_profit_share:.3f} off target")
    counts = np.bincount(order_customer, minlength=ref.TOTAL_CUSTOMERS)
    if (counts == 0).any():
        fail("a customer has no orders")
    loyal_customers = int((counts >= threshold).sum())
    if loyal_customers != ref.LOYAL_CUSTOMER_COUNT:
        fail(f"{loyal_customers} loyal customers != {ref.LOYAL_CUSTOMER_COUNT}")

    if len(np.unique(line_sku)) != ref.TOTAL_SKUS:
        fail("SKU count drifted")
    if n_orders != ref.TOTAL_ORDERS:
        fail("order count drifted")

    return {
        "lines": int(len(line_sales)),
        "orders": n_orders,
        "customers": int(ref.TOTAL_CUSTOMERS),
        "skus": int(ref.TOTAL_SKUS),
        "total_sales": float(total_sales),
        "total_profit": float(total_profit),
        "overall_margin": float(margin),
        "subsidies": subsidies,
        "loyal_profit_share": float(loyal_profit_share),
        "loyal_customers": loyal_customers,
    }


def write_csv(path, seed: int = DEFAULT_SEED) -> dict:
    """Generate the bundled dataset and write it as CSV; returns the summary."""
    ds = generate(seed)
    ds.write_csv(path)
    return ds.summary
