"""Shared domain types: stablecoin profiles, impact objects and weight schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

from .errors import ConfigError, InputError


class CollateralClass(str, Enum):
    FIAT = "Fiat"
    RWA = "RWA"
    CRYPTO = "Crypto"


class Mechanism(str, Enum):
    LIQUIDATION = "Liquidation"
    SUPPLY_ADJUSTMENT = "SupplyAdjustment"
    HEDGING = "Hedging"
    EMERGENCY = "Emergency"
    IMPLICIT = "Implicit"


class YieldSource(str, Enum):
    NATIVE_PROTOCOL_REVENUE = "NativeProtocolRevenue"
    CASH_EQUIVALENT_YIELD = "CashEquivalentYield"
    L1_STAKING_REWARD = "L1StakingReward"
    DERIVATIVES_YIELD = "DerivativesYield"
    EXTERNAL_DEFI_YIELD = "ExternalDefiYield"
    CUSTODIAN_REVENUE = "CustodianRevenue"
    COMMUNITY_SUBSIDY = "CommunitySubsidy"
    SECONDARY_TOKEN_EMISSION = "SecondaryTokenEmission"


@dataclass(frozen=True)
class StablecoinProfile:
    """Static descriptor of one stablecoin.

    ``yield_rate`` is ``None`` when the issuer offers yield but does not disclose
    the rate. ``yield_sources_disclosed=False`` marks rows whose yield source is
    not published; only disclosed sources are checked against the rate.
    """

    symbol: str
    peg_currency: str
    collateral_classes: frozenset[CollateralClass]
    mechanisms: frozenset[Mechanism]
    yield_rate: float | None
    yield_sources: frozenset[YieldSource]
    market_cap: float
    project: str = ""
    yield_sources_disclosed: bool = True

    def __post_init__(self):
        if not self.collateral_classes:
            raise InputError(f"{self.symbol}: collateral_classes must be nonempty")
        if not self.mechanisms:
            raise InputError(f"{self.symbol}: mechanisms must be nonempty")
        if self.yield_rate is not None and not (self.yield_rate >= 0 and math.isfinite(self.yield_rate)):
            raise InputError(f"{self.symbol}: yield_rate must be >= 0, got {self.yield_rate}")
        if not self.market_cap > 0:
            raise InputError(f"{self.symbol}: market_cap must be > 0")
        if self.yield_sources_disclosed and (self.yield_rate or 0) > 0 and not self.yield_sources:
            raise InputError(f"{self.symbol}: positive yield_rate requires yield_sources")


class Exposure(str, Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"


class Nature(str, Enum):
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"


class Loss(str, Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"


FACETS = {"exposure": Exposure, "nature": Nature, "loss": Loss}
FACET_LEVELS = tuple(level.value for enum in FACETS.values() for level in enum)


@dataclass(frozen=True)
class ImpactDegree:
    exposure: Exposure
    nature: Nature
    loss: Loss

    @classmethod
    def parse(cls, text: str) -> "ImpactDegree":
        """Parse ``"(E1,I3,L2)"`` or ``"E1,I3,L2"`` (case-insensitive)."""
        parts = [p.strip().upper() for p in text.strip().strip("()").split(",")]
        if len(parts) != 3:
            raise InputError(f"impact degree needs three facets, got {text!r}")
        try:
            return cls(Exposure(parts[0]), Nature(parts[1]), Loss(parts[2]))
        except ValueError as exc:
            raise InputError(f"bad impact degree {text!r}: {exc}") from None

    def levels(self) -> tuple[str, str, str]:
        return (self.exposure.value, self.nature.value, self.loss.value)

    def __str__(self) -> str:
        return "({},{},{})".format(*self.levels())


class ObjectName(str, Enum):
    MARKET_VOLATILITY = "MarketVolatility"
    PRICE_MANIPULATION = "PriceManipulation"
    CODE_VULNERABILITY = "CodeVulnerability"
    FLASH_LOAN = "FlashLoan"
    GOVERNANCE_ATTACK = "GovernanceAttack"
    RUG_PULL = "RugPull"
    ACCESS_CONTROL = "AccessControl"
    IMPACTED_FUND = "ImpactedFund"


class Category(str, Enum):
    PRICE_FLUCTUATION = "PriceFluctuation"
    SMART_CONTRACT_ISSUE = "SmartContractIssue"
    PERIPHERAL_FACTOR = "PeripheralFactor"


CATEGORY_OF: Mapping[ObjectName, Category] = MappingProxyType({
    ObjectName.MARKET_VOLATILITY: Category.PRICE_FLUCTUATION,
    ObjectName.PRICE_MANIPULATION: Category.PRICE_FLUCTUATION,
    ObjectName.CODE_VULNERABILITY: Category.SMART_CONTRACT_ISSUE,
    ObjectName.FLASH_LOAN: Category.SMART_CONTRACT_ISSUE,
    ObjectName.GOVERNANCE_ATTACK: Category.SMART_CONTRACT_ISSUE,
    ObjectName.RUG_PULL: Category.PERIPHERAL_FACTOR,
    ObjectName.ACCESS_CONTROL: Category.PERIPHERAL_FACTOR,
    ObjectName.IMPACTED_FUND: Category.PERIPHERAL_FACTOR,
})

# Reference order; degrees and quantification metric kinds per object.
_DEFAULT_TABLE = (
    (ObjectName.MARKET_VOLATILITY, "E1,I3,L2", "Price standard deviation in the past 5 years"),
    (ObjectName.PRICE_MANIPULATION, "E2,I3,L2", "Regular security auditing"),
    (ObjectName.CODE_VULNERABILITY, "E2,I1,L3", "Regular security auditing"),
    (ObjectName.FLASH_LOAN, "E2,I1,L3", "Regular security auditing"),
    (ObjectName.GOVERNANCE_ATTACK, "E2,I1,L3", "Regular security auditing and token decentralization"),
    (ObjectName.RUG_PULL, "E3,I1,L3", "Regular security auditing and attestation report"),
    (ObjectName.ACCESS_CONTROL, "E3,I1,L3", "Regular security auditing"),
    (ObjectName.IMPACTED_FUND, "E2,I1,L1", "Regular attestation report"),
)


@dataclass(frozen=True)
class ImpactObject:
    name: ObjectName
    degree: ImpactDegree
    metric_kind: str = ""

    @property
    def category(self) -> Category:
        return CATEGORY_OF[self.name]


def default_impact_objects() -> list[ImpactObject]:
    """The eight upstream impact objects in table order."""
    return [ImpactObject(name, ImpactDegree.parse(deg), kind) for name, deg, kind in _DEFAULT_TABLE]


class HolderCategory(str, Enum):
    EXCHANGE = "Exchange"
    ASSET_MANAGEMENT = "AssetManagement"
    DEFI_PROTOCOL = "DefiProtocol"
    BLOCKCHAIN_INFRASTRUCTURE = "BlockchainInfrastructure"
    WHALE_RETAIL = "WhaleRetail"
    UNLABELED = "Unlabeled"


LABELED_CATEGORIES = tuple(c for c in HolderCategory if c is not HolderCategory.UNLABELED)


class CombineRule(str, Enum):
    MEAN = "Mean"
    SUM = "Sum"
    PRODUCT = "Product"


DEFAULT_LEVEL_SCORES = {
    "E1": 1.0, "E2": 2.0, "E3": 3.0,
    "I1": 1.0, "I2": 2.0, "I3": 3.0,
    "L1": 1.0, "L2": 2.0, "L3": 3.0,
}


@dataclass(frozen=True)
class WeightScheme:
    """Maps an impact degree to the scalar weight used in the upstream sum.

    Level scores may be partial; :func:`weight_of` reports the missing level.
    """

    facet_level_scores: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_LEVEL_SCORES))
    combine_rule: CombineRule = CombineRule.MEAN
    scale: float = 1.0
    monotone: bool = True

    def __post_init__(self):
        scores = {str(k).upper(): float(v) for k, v in dict(self.facet_level_scores).items()}
        unknown = sorted(set(scores) - set(FACET_LEVELS))
        if unknown:
            raise ConfigError(f"unknown facet levels {unknown}; valid: {list(FACET_LEVELS)}")
        for level, value in scores.items():
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"facet level {level} score must be finite and >= 0, got {value}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ConfigError(f"scale must be positive, got {self.scale}")
        if self.monotone:
            for enum in FACETS.values():
                present = [scores[lv.value] for lv in enum if lv.value in scores]
                if any(a > b for a, b in zip(present, present[1:])):
                    raise ConfigError(f"{enum.__name__} level scores must be nondecreasing (set monotone=false to override)")
        object.__setattr__(self, "facet_level_scores", MappingProxyType(scores))
        object.__setattr__(self, "combine_rule", CombineRule(self.combine_rule))

    def with_scale(self, scale: float) -> "WeightScheme":
        return WeightScheme(dict(self.facet_level_scores), self.combine_rule, scale, self.monotone)

    def check_positive(self) -> None:
        """Raise unless every possible degree gets a strictly positive weight."""
        for e in Exposure:
            for i in Nature:
                for l in Loss:
                    if not weight_of(ImpactDegree(e, i, l), self) > 0:
                        raise ConfigError(f"scheme gives zero weight to degree ({e.value},{i.value},{l.value})")

    @classmethod
    def from_dict(cls, data: Mapping) -> "WeightScheme":
        allowed = {"facet_level_scores", "combine_rule", "scale", "monotone"}
        extra = set(data) - allowed
        if extra:
            raise ConfigError(f"unknown weight scheme keys {sorted(extra)}")
        try:
            rule = CombineRule(data.get("combine_rule", CombineRule.MEAN.value))
        except ValueError:
            raise ConfigError(f"combine_rule must be one of {[r.value for r in CombineRule]}") from None
        return cls(
            facet_level_scores=data.get("facet_level_scores", DEFAULT_LEVEL_SCORES),
            combine_rule=rule,
            scale=float(data.get("scale", 1.0)),
            monotone=bool(data.get("monotone", True)),
        )

    def to_dict(self) -> dict:
        return {
            "facet_level_scores": dict(self.facet_level_scores),
            "combine_rule": self.combine_rule.value,
            "scale": self.scale,
            "monotone": self.monotone,
        }


def weight_of(degree: ImpactDegree, scheme: WeightScheme) -> float:
    scores = []
    for facet, level in zip(FACETS, degree.levels()):
        try:
            scores.append(scheme.facet_level_scores[level])
        except KeyError:
            raise ConfigError(f"weight scheme has no score for {facet} level {level}") from None
    if scheme.combine_rule is CombineRule.MEAN:
        combined = math.fsum(scores) / 3.0
    elif scheme.combine_rule is CombineRule.SUM:
        combined = math.fsum(scores)
    else:
        combined = math.prod(scores)
    return combined * scheme.scale
