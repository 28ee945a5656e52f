#!/usr/bin/env python3
"""Regenerate the packaged calibration fixtures under src/sclego/data.

Everything written here is calibration data: values are chosen so the engine
reproduces published figures, not measured. Run from the repository root:

    python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import sys
from decimal import Decimal
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from sclego.collateral import JurisdictionTable, PriceSeries, RedemptionCosts  # noqa: E402
from sclego.dataio import (  # noqa: E402
    write_assessments,
    write_holder_snapshot,
    write_jurisdictions,
    write_manifest,
    write_price_csv,
    write_redemption_costs,
)
from sclego.downstream import Holder, HolderSnapshot  # noqa: E402
from sclego.model import (  # noqa: E402
    CATEGORY_OF,
    Category,
    HolderCategory,
    WeightScheme,
    default_impact_objects,
    weight_of,
)
from sclego.upstream import AssessmentRecord  # noqa: E402

DATA = ROOT / "src" / "sclego" / "data"

# -- collateral comparison inputs ----------------------------------------------

WINDOW = (dt.date(2020, 3, 25), dt.date(2025, 3, 24))
# asset: (label, mean, population std, simulated drift, simulated vol)
SERIES = {
    "USD": ("USD (fiat currency)", 100.0, 5.93, 0.0, 0.004),
    "Gold": ("Gold (RWA)", 1900.0, 313.77, 0.0004, 0.01),
    "Bitcoin": ("Bitcoin (cryptocurrency)", 37000.0, 23413.08, 0.0012, 0.035),
}
REDEMPTION = [("USD", 27.0, 2.535), ("Gold", 52.0, 5.04), ("Bitcoin", 2.0, 0.04)]
INFLATION = 0.0425
NOMINAL = {"USD": 0.0, "Gold": 0.1014, "Bitcoin": 0.1003}
G20 = ["Argentina", "Australia", "Brazil", "Canada", "China", "France", "Germany", "India",
       "Indonesia", "Italy", "Japan", "Mexico", "Russia", "Saudi Arabia", "South Africa",
       "South Korea", "Turkey", "United Kingdom", "United States", "European Union", "African Union"]
BTC_RESTRICTED = {"China", "India", "Indonesia", "Russia", "Saudi Arabia", "Turkey", "South Africa", "African Union"}


def calibrated_series(asset: str, seed: int) -> PriceSeries:
    _, mean, std, mu, vol = SERIES[asset]
    days = (WINDOW[1] - WINDOW[0]).days + 1
    rng = np.random.default_rng(seed)
    while True:
        path = np.exp(np.cumsum(mu + vol * rng.standard_normal(days)))
        z = (path - path.mean()) / path.std()
        prices = mean + std * z
        if prices.min() > 0.05 * mean:
            break
    dates = [WINDOW[0] + dt.timedelta(days=i) for i in range(days)]
    note = f"synthetic calibration series: mean {mean}, population std {std}; not market data"
    return PriceSeries(asset, tuple(zip(dates, (float(p) for p in prices))), note)


def build_table1() -> list[str]:
    out = DATA / "table1"
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, asset in enumerate(SERIES):
        path = out / f"{asset.lower()}.csv"
        path.write_bytes(write_price_csv(calibrated_series(asset, 20250324 + k)))
        files.append(path)
    (out / "redemption.csv").write_bytes(write_redemption_costs([RedemptionCosts(*r) for r in REDEMPTION]))
    table = JurisdictionTable(
        tuple((j, 1.0) for j in G20),
        {"USD": (1,) * 21, "Gold": (1,) * 21, "Bitcoin": tuple(0 if j in BTC_RESTRICTED else 1 for j in G20)},
    )
    (out / "jurisdictions.csv").write_bytes(
        b"#note=illustrative compliance assignment reproducing the published counts\n" + write_jurisdictions(table))
    inflation = {
        "inflation": INFLATION,
        "note": "nominal returns are calibration inputs reproducing the published real returns",
        "assets": {a: {"nominal_return": NOMINAL[a], "label": SERIES[a][0]} for a in SERIES},
    }
    (out / "inflation.json").write_text(json.dumps(inflation, indent=2) + "\n")
    metrics = {
        "prices": {a: f"{a.lower()}.csv" for a in SERIES},
        "redemption": "redemption.csv",
        "jurisdictions": "jurisdictions.csv",
        "inflation": "inflation.json",
        "mode": "Approx",
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    return [f"table1/{n}" for n in ("usd.csv", "gold.csv", "bitcoin.csv", "redemption.csv",
                                    "jurisdictions.csv", "inflation.json", "metrics.json")]


# -- risk scores and token distribution ------------------------------------------

# symbol: (price fluctuation, smart contract issue, peripheral factor, reported total)
UPSTREAM = {
    "USDT": (2.1583, 3.7000, 5.7101, 12.7117),
    "USDC": (2.1583, 3.7000, 5.6553, 12.6570),
    "DAI": (1.9833, 3.4000, 5.4750, 11.7492),
    "USDS": (0.0001, 0.0000, 2.5000, 3.0940),
    "FDUSD": (2.0417, 3.5000, 5.4803, 12.8872),
    "USDe": (1.5167, 2.6000, 4.3366, 9.7278),
    "PYUSD": (4.1583, 3.7000, 5.6553, 14.8439),
    "USDD": (2.1000, 3.6000, 5.6500, 13.2500),
    "FRAX": (1.4583, 2.5000, 4.6875, 9.3755),
    "TUSD": (2.2167, 3.8000, 3.3250, 11.2278),
    "USDB": (2.3347, 4.0000, 6.0000, 14.1825),
}
# percent of total supply: exchange, asset management, DeFi, infrastructure, whale/retail
DOWNSTREAM = {
    "USDT": ("53.2682", "4.4057", "0.6603", "6.6690", "13.7521"),
    "USDC": ("14.6538", "5.5597", "3.5957", "3.9556", "47.6325"),
    "DAI": ("2.0564", "3.3415", "25.0256", "6.3893", "47.7420"),
    "USDS": ("0.0417", "0.4356", "70.8696", "0", "28.6523"),
    "FDUSD": ("96.7493", "0.0558", "0.0207", "0.0169", "3.1495"),
    "USDe": ("8.4785", "0.5660", "82.1671", "0.0634", "8.7129"),
    "PYUSD": ("17.6987", "9.9289", "1.3587", "0.1112", "70.7349"),
    "USDD": ("1.2696", "0.0054", "98.0634", "0.1439", "0.5097"),
    "FRAX": ("0.0165", "0.2029", "53.1922", "14.8037", "31.7717"),
    "TUSD": ("3.9264", "0.1905", "0.7820", "0.2251", "94.2145"),
    "USDB": ("0", "0", "12.0578", "0.0394", "82.5321"),
}
AS_OF = dt.date(2025, 5, 31)
TOTAL_SUPPLY = 100_000_000
HOLDER_SPLIT = (0.4, 0.25, 0.15, 0.1, 0.06, 0.04)


def fitted_metrics(targets: tuple[float, float, float]) -> tuple[dict, dict]:
    """Equal metric for every object of a category, solved so the weighted
    subtotal hits the target under the default weight scheme."""
    scheme = WeightScheme()
    objects = default_impact_objects()
    by_cat = dict(zip(Category, targets[:3]))
    metrics, evidence = {}, {}
    for cat, target in by_cat.items():
        members = [o for o in objects if CATEGORY_OF[o.name] is cat]
        m = target / sum(weight_of(o.degree, scheme) for o in members)
        assert 0.0 <= m <= 1.0, (cat, m)
        for o in members:
            metrics[o.name] = m
            evidence[o.name] = f"calibration: {cat.value} subtotal fitted to {target:.4f}"
    return metrics, evidence


def split_mass(units: int, parts: int) -> list[int]:
    weights = HOLDER_SPLIT[:parts]
    raw = [int(units * w / sum(weights)) for w in weights]
    raw[0] += units - sum(raw)
    return [r for r in raw if r > 0]


def snapshot(symbol: str) -> HolderSnapshot:
    holders = []
    cats = [c for c in HolderCategory if c is not HolderCategory.UNLABELED]
    for cat, pct in zip(cats, DOWNSTREAM[symbol]):
        units = int(Decimal(pct) * TOTAL_SUPPLY / 100)
        if units == 0:
            continue
        parts = 6 if units >= 1_000_000 else 2 if units >= 100 else 1
        for i, bal in enumerate(split_mass(units, parts)):
            addr = "0x" + hashlib.sha256(f"{symbol}/{cat.value}/{i}".encode()).hexdigest()[:40]
            holders.append(Holder(addr, float(bal), cat))
    holders.sort(key=lambda h: (-h.balance, h.address))
    return HolderSnapshot(symbol, AS_OF, float(TOTAL_SUPPLY), tuple(holders), 1000)


def build_paper2025() -> list[str]:
    out = DATA / "paper-2025"
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    records = []
    for sym, values in UPSTREAM.items():
        metrics, evidence = fitted_metrics(values)
        records.append(AssessmentRecord(sym, metrics, AS_OF, evidence, reported_total=values[3]))
    (out / "assessments.csv").write_bytes(
        b"#dataset=paper-2025\n#note=metric values fitted offline to reproduce published category scores\n"
        + write_assessments(records))
    files = ["paper-2025/assessments.csv"]
    for sym in DOWNSTREAM:
        (out / "snapshots" / f"{sym}.csv").write_bytes(write_holder_snapshot(snapshot(sym)))
        files.append(f"paper-2025/snapshots/{sym}.csv")
    (out / "scheme.json").write_text(json.dumps({"weight_scheme": WeightScheme().to_dict()}, indent=2) + "\n")
    files.append("paper-2025/scheme.json")
    return files


# -- scenarios ------------------------------------------------------------------

def build_scenarios() -> list[str]:
    out = DATA / "scenarios"
    out.mkdir(parents=True, exist_ok=True)
    scenarios = {
        "reflexive-crash": {
            "name": "reflexive-crash",
            "description": (
                "Price falls 0.35 and collateral 10% at t=5 with a 6-step oracle lag. "
                "The algorithmic run redeems at par from a reserve that no longer covers "
                "supply; the over-collateralised run keeps its backing."
            ),
            "config": {
                "horizon": 60.0, "dt": 0.25, "A": -0.5, "B": 0.5, "sigma": 0.01,
                "sigma_kind": "proportional", "oracle_lag": 6, "peg_target": 1.0,
                "drift_reference": "backing",
                "shocks": [{"time": 5.0, "size": -0.35, "target": "price"},
                           {"time": 5.0, "size": -0.1, "target": "collateral"}],
            },
            "initial": {"price": 1.0, "supply": 1000.0, "collateral_value": 1000.0, "debt": 0.0},
            "seeds": list(range(1, 101)),
            "runs": {
                "supply-adjustment": {
                    "controllers": [{"kind": "SupplyAdjustment", "adjustment_coefficient": 0.3,
                                     "target_price": 1.0, "redeem_at_par": True}],
                },
                "liquidation": {
                    "initial": {"collateral_value": 1800.0, "debt": 1000.0},
                    "controllers": [{"kind": "Liquidation", "liquidation_threshold": 1.5,
                                     "discount": 0.1, "liquidation_rate": 0.5}],
                },
            },
        },
        "null-dynamics": {
            "name": "null-dynamics",
            "description": "No drift, no noise, no control: the price stays put.",
            "config": {"horizon": 10.0, "dt": 0.5, "A": 0.0, "B": 0.0, "sigma": 0.0},
            "initial": {"price": 1.0, "supply": 1000.0},
            "controllers": [],
            "seeds": [1, 2, 3],
        },
        "exponential-decay": {
            "name": "exponential-decay",
            "description": "Deterministic linear drift; closed form P0 exp(A t).",
            "config": {"horizon": 10.0, "dt": 0.01, "A": -0.1, "B": 0.0, "sigma": 0.0},
            "initial": {"price": 1.1, "supply": 1000.0},
            "controllers": [],
            "seeds": [0],
        },
        "martingale": {
            "name": "martingale",
            "description": "Driftless constant-volatility walk for the mean check.",
            "config": {"horizon": 1.0, "dt": 0.1, "A": 0.0, "B": 0.0, "sigma": 0.1},
            "initial": {"price": 1.0, "supply": 1000.0},
            "controllers": [],
            "seeds": list(range(10_000)),
        },
    }
    files = []
    for name, doc in scenarios.items():
        (out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
        files.append(f"scenarios/{name}.json")
    return files


def main() -> None:
    files = {f: AS_OF.isoformat() for f in build_paper2025()}
    files.update({f: WINDOW[1].isoformat() for f in build_table1()})
    files.update({f: None for f in build_scenarios()})
    files["incidents.csv"] = "2025-05-31"
    files["stablecoins.csv"] = "2025-05-31"
    (DATA / "MANIFEST.json").write_bytes(write_manifest(DATA, files))
    print(f"wrote {len(files)} fixture files under {DATA}")


if __name__ == "__main__":
    main()
