"""Downstream composition: token-share vectors, archetypes, concentration."""

from __future__ import annotations

import datetime as dt
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import InputError
from .model import LABELED_CATEGORIES, HolderCategory

COVERAGE_WARN_BELOW = 0.75


@dataclass(frozen=True)
class Holder:
    address: str
    balance: float
    category: HolderCategory


@dataclass(frozen=True)
class HolderSnapshot:
    symbol: str
    taken_at: dt.date
    total_supply: float
    holders: tuple[Holder, ...]
    top_n: int = 1000

    def __post_init__(self):
        holders = tuple(self.holders)
        if len(holders) > self.top_n:
            raise InputError(f"{self.symbol}: {len(holders)} holders exceeds top_n={self.top_n}")
        seen = set()
        for h in holders:
            if not (math.isfinite(h.balance) and h.balance > 0):
                raise InputError(f"{self.symbol}: balance of {h.address} must be positive, got {h.balance}")
            if h.address in seen:
                raise InputError(f"{self.symbol}: duplicate address {h.address}")
            seen.add(h.address)
        covered = math.fsum(h.balance for h in holders)
        if not (math.isfinite(self.total_supply) and self.total_supply >= 0):
            raise InputError(f"{self.symbol}: total_supply must be finite and >= 0")
        if covered > self.total_supply * (1 + 1e-12):
            raise InputError(f"{self.symbol}: holder balances {covered} exceed total supply {self.total_supply}")
        object.__setattr__(self, "holders", holders)


@dataclass(frozen=True)
class TokenShareVector:
    shares: Mapping[HolderCategory, float]

    def __post_init__(self):
        shares = {c: float(self.shares.get(c, 0.0)) for c in HolderCategory}
        for c, v in shares.items():
            if not (0.0 <= v <= 1.0 + 1e-12):
                raise InputError(f"share of {c.value} outside [0,1]: {v}")
        if math.fsum(shares.values()) > 1 + 1e-9:
            raise InputError("token shares sum above 1")
        object.__setattr__(self, "shares", shares)

    def __getitem__(self, category: HolderCategory | str) -> float:
        return self.shares[HolderCategory(category)]

    @property
    def coverage(self) -> float:
        return math.fsum(self.shares.values())

    @classmethod
    def empty(cls) -> "TokenShareVector":
        return cls({})


def token_shares(snapshot: HolderSnapshot) -> TokenShareVector:
    """Fraction of total supply held by each holder category."""
    if snapshot.total_supply == 0:
        raise InputError(f"{snapshot.symbol}: total_supply is zero")
    mass = {c: [] for c in HolderCategory}
    for h in snapshot.holders:
        mass[h.category].append(h.balance)
    vec = TokenShareVector({c: math.fsum(b) / snapshot.total_supply for c, b in mass.items()})
    if vec.coverage < COVERAGE_WARN_BELOW:
        warnings.warn(f"{snapshot.symbol}: snapshot covers only {vec.coverage:.2%} of supply",
                      RuntimeWarning, stacklevel=2)
    return vec


class ArchetypeKind(str, Enum):
    DEFI_CENTRIC = "DefiCentric"
    EXCHANGE_CENTRIC = "ExchangeCentric"
    WHALE_DOMINATED = "WhaleDominated"
    ASSET_MGMT_CENTRIC = "AssetMgmtCentric"
    INFRA_CENTRIC = "InfraCentric"
    MIXED = "Mixed"


ARCHETYPE_OF = {
    HolderCategory.EXCHANGE: ArchetypeKind.EXCHANGE_CENTRIC,
    HolderCategory.ASSET_MANAGEMENT: ArchetypeKind.ASSET_MGMT_CENTRIC,
    HolderCategory.DEFI_PROTOCOL: ArchetypeKind.DEFI_CENTRIC,
    HolderCategory.BLOCKCHAIN_INFRASTRUCTURE: ArchetypeKind.INFRA_CENTRIC,
    HolderCategory.WHALE_RETAIL: ArchetypeKind.WHALE_DOMINATED,
}


@dataclass(frozen=True)
class Archetype:
    kind: ArchetypeKind
    dominant_share: float


def classify_archetype(v: TokenShareVector, threshold: float = 0.5) -> Archetype:
    values = [v[c] for c in LABELED_CATEGORIES]
    top = max(values)
    leaders = [c for c, x in zip(LABELED_CATEGORIES, values) if x == top]
    if len(leaders) > 1 or top < threshold:
        return Archetype(ArchetypeKind.MIXED, top)
    return Archetype(ARCHETYPE_OF[leaders[0]], top)


def concentration_index(snapshot: HolderSnapshot) -> float:
    """Herfindahl-Hirschman index over the covered balances."""
    if not snapshot.holders:
        raise InputError(f"{snapshot.symbol}: no holders")
    covered = math.fsum(h.balance for h in snapshot.holders)
    return math.fsum((h.balance / covered) ** 2 for h in snapshot.holders)
