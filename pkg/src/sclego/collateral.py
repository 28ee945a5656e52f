"""Collateral-asset comparison metrics: PSD, REI, real return and J-Score."""

from __future__ import annotations

import datetime as dt
import math
import statistics
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import InputError
from .model import CollateralClass, StablecoinProfile


@dataclass(frozen=True)
class PriceSeries:
    asset: str
    observations: tuple[tuple[dt.date, float], ...]
    source_note: str = ""

    def __post_init__(self):
        obs = tuple((d, float(p)) for d, p in self.observations)
        for (d0, _), (d1, _) in zip(obs, obs[1:]):
            if not d1 > d0:
                raise InputError(f"{self.asset}: dates must be strictly increasing ({d0} then {d1})")
        for d, p in obs:
            if not (math.isfinite(p) and p > 0):
                raise InputError(f"{self.asset}: price on {d} must be positive, got {p}")
        object.__setattr__(self, "observations", obs)

    @property
    def prices(self) -> list[float]:
        return [p for _, p in self.observations]

    def __len__(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class RedemptionCosts:
    asset: str
    fee_usd: float
    delay_days: float

    def __post_init__(self):
        for name in ("fee_usd", "delay_days"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InputError(f"{self.asset}: {name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class JurisdictionTable:
    jurisdictions: tuple[tuple[str, float], ...]
    compliance: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        n = len(self.jurisdictions)
        for name, w in self.jurisdictions:
            if not (math.isfinite(w) and w >= 0):
                raise InputError(f"jurisdiction {name}: weight must be >= 0")
        for asset, vec in self.compliance.items():
            if len(vec) != n:
                raise InputError(f"{asset}: compliance vector has {len(vec)} entries, expected {n}")
            if any(c not in (0, 1) for c in vec):
                raise InputError(f"{asset}: compliance indicators must be 0 or 1")


@dataclass(frozen=True)
class InflationInputs:
    nominal_return_i: float
    inflation_pi: float

    def __post_init__(self):
        if not (math.isfinite(self.nominal_return_i) and math.isfinite(self.inflation_pi)):
            raise InputError("nominal return and inflation must be finite")


class ReturnMode(str, Enum):
    EXACT = "Exact"
    APPROX = "Approx"


def psd(series: PriceSeries) -> float:
    """Population standard deviation of the closing prices (1/T normalisation)."""
    prices = series.prices
    if len(prices) < 2:
        raise InputError(f"{series.asset}: need at least 2 observations, got {len(prices)}")
    return statistics.pstdev(prices)


def _minmax(values: Sequence[float], label: str) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        warnings.warn(f"all {label} values equal; normalising to 0", RuntimeWarning, stacklevel=3)
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def rei(costs: Sequence[RedemptionCosts]) -> dict[str, float]:
    """Redemption efficiency index per asset: min-max fee plus min-max delay.

    Lower is better; values lie in [0, 2].
    """
    if len(costs) < 2:
        raise InputError("REI compares assets; need at least 2")
    assets = [c.asset for c in costs]
    if len(set(assets)) != len(assets):
        raise InputError(f"duplicate assets in redemption costs: {assets}")
    f = _minmax([c.fee_usd for c in costs], "fee")
    d = _minmax([c.delay_days for c in costs], "delay")
    return {a: fi + di for a, fi, di in zip(assets, f, d)}


def real_return(inputs: InflationInputs, mode: ReturnMode | str = ReturnMode.APPROX) -> float:
    mode = ReturnMode(mode)
    if mode is ReturnMode.APPROX:
        return inputs.nominal_return_i - inputs.inflation_pi
    if inputs.inflation_pi == -1:
        raise ZeroDivisionError("inflation of -100% leaves the Fisher relation undefined")
    return (1 + inputs.nominal_return_i) / (1 + inputs.inflation_pi) - 1


def j_score(table: JurisdictionTable, asset: str) -> float:
    try:
        vec = table.compliance[asset]
    except KeyError:
        raise KeyError(f"asset {asset!r} not in jurisdiction table; known: {sorted(table.compliance)}") from None
    return math.fsum(w * c for (_, w), c in zip(table.jurisdictions, vec))


def median_yield(profiles: Iterable[StablecoinProfile], collateral: CollateralClass | str,
                 include_zero: bool = True) -> float:
    """Median native yield over stablecoins backed by ``collateral``.

    Undisclosed rates are skipped; stablecoins without yield count as 0 unless
    ``include_zero`` is false.
    """
    collateral = CollateralClass(collateral)
    rates = [p.yield_rate for p in profiles
             if collateral in p.collateral_classes and p.yield_rate is not None]
    if not include_zero:
        rates = [r for r in rates if r > 0]
    if not rates:
        raise InputError(f"no stablecoins with a known yield for collateral {collateral.value}")
    return statistics.median(rates)


METRICS = ("psd", "rei", "real_return", "j_score")
# min is best for volatility and redemption cost, max for return and compliance
BEST_IS_MIN = {"psd": True, "rei": True, "real_return": False, "j_score": False}


@dataclass(frozen=True)
class ComparisonRow:
    asset: str
    label: str
    psd: float
    rei: float
    real_return: float
    j_score: float


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    best: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def row(self, asset: str) -> ComparisonRow:
        for r in self.rows:
            if r.asset == asset:
                return r
        raise KeyError(asset)

    def is_best(self, asset: str, metric: str) -> bool:
        return asset in self.best[metric]


def _mark_best(rows: Sequence[ComparisonRow]) -> dict[str, frozenset[str]]:
    best = {}
    for metric in METRICS:
        values = [getattr(r, metric) for r in rows]
        if metric == "real_return" and any(v > 0 for v in values):
            # every asset that beats inflation counts as better, not only the top one
            best[metric] = frozenset(r.asset for r, v in zip(rows, values) if v > 0)
            continue
        target = min(values) if BEST_IS_MIN[metric] else max(values)
        best[metric] = frozenset(r.asset for r, v in zip(rows, values) if v == target)
    return best


def build_comparison(series: Mapping[str, PriceSeries],
                     costs: Sequence[RedemptionCosts],
                     inflation: Mapping[str, InflationInputs],
                     jurisdictions: JurisdictionTable,
                     labels: Mapping[str, str] | None = None,
                     mode: ReturnMode | str = ReturnMode.APPROX) -> ComparisonTable:
    """One row per asset with the four metrics, best cells marked per column.

    Row order follows ``costs``. Values are unrounded; ties are compared exactly.
    """
    order = [c.asset for c in costs]
    sets = {
        "price series": set(series),
        "redemption costs": set(order),
        "inflation": set(inflation),
        "jurisdictions": set(jurisdictions.compliance),
    }
    reference = set(order)
    problems = [f"{name}: missing {sorted(reference - s)}, extra {sorted(s - reference)}"
                for name, s in sets.items() if s != reference]
    if problems:
        raise InputError("asset sets differ; " + "; ".join(problems))
    rei_values = rei(costs)
    labels = labels or {}
    rows = tuple(
        ComparisonRow(
            asset=a,
            label=labels.get(a, a),
            psd=psd(series[a]),
            rei=rei_values[a],
            real_return=real_return(inflation[a], mode),
            j_score=j_score(jurisdictions, a),
        )
        for a in order
    )
    return ComparisonTable(rows, _mark_best(rows))
