"""Reference aggregates for the retail dataset the diagnostics reproduce.

Headline figures for the four-year Global Superstore practice dataset.
The findings report compares computed values against them, and the bundled
synthetic dataset is calibrated to land on them (counts exactly, money
aggregates within the stated tolerances).
"""

from __future__ import annotations

# Dataset shape (exact)
TOTAL_ORDERS = 25_035
TOTAL_CUSTOMERS = 1_590
TOTAL_SKUS = 10_292
N_MARKETS = 7
N_CATEGORIES = 3
YEARS = (2011, 2014)

# Headline money figures
TOTAL_SALES = 12_640_000.0        # +/- 0.5%
OVERALL_MARGIN = 0.116            # +/- 0.3pp

# Category margins (+/- 0.2pp)
CATEGORY_MARGINS = {
    "Furniture": 0.0694,
    "Technology": 0.1399,
    "Office Supplies": 0.1317,
}

# Market benchmarks (sales +/- 1%, margin +/- 0.3pp)
MARKET_SALES = {"APAC": 3_590_000.0, "EMEA": 2_940_000.0}
MARKET_MARGINS = {"APAC": 0.125, "EMEA": 0.068}

# Discount economics: the last distinct level at which average profit per
# order stays non-negative; every level above it loses money.
DISCOUNT_THRESHOLD = 0.20

# Sub-category concentration inside Furniture
TABLES_LOSS_SHARE = 0.44          # of total Furniture losses, +/- 5pp
TABLES_SKU_SHARE = 0.23           # of Furniture SKUs, +/- 3pp

# Shipping subsidy (only comparable with the repo's calibrated fee config)
SHIPPING_TOTAL_SUBSIDY = 1_350_000.0   # +/- 1%
FIRST_CLASS_SUBSIDY = 470_000.0        # worst mode, +/- 1%
WORST_SHIP_MODE = "First Class"

# Customer loyalty concentration (threshold committed in data/loyalty.json)
LOYAL_CUSTOMER_SHARE = 0.55       # +/- 5pp
LOYAL_PROFIT_SHARE = 0.92         # +/- 5pp
LOYAL_CUSTOMER_COUNT = 879
