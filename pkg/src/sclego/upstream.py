"""Upstream risk: per-object metrics aggregated into a weighted score."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from statistics import fmean
from typing import Mapping, Sequence

from .errors import InputError
from .model import (
    Category,
    ImpactObject,
    ObjectName,
    WeightScheme,
    default_impact_objects,
    weight_of,
)


@dataclass(frozen=True)
class AssessmentRecord:
    symbol: str
    metrics: Mapping[ObjectName, float]
    as_of: dt.date
    evidence: Mapping[ObjectName, str] = field(default_factory=dict)
    reported_total: float | None = None

    def __post_init__(self):
        metrics = {ObjectName(k): float(v) for k, v in dict(self.metrics).items()}
        missing = [o.value for o in ObjectName if o not in metrics]
        if missing:
            raise InputError(f"{self.symbol}: assessment missing objects {missing}")
        for name, m in metrics.items():
            if not (0.0 <= m <= 1.0):
                raise InputError(f"{self.symbol}: metric {name.value} must lie in [0,1], got {m}")
        object.__setattr__(self, "metrics", metrics)
        object.__setattr__(self, "evidence", {ObjectName(k): str(v) for k, v in dict(self.evidence).items()})


@dataclass(frozen=True)
class UpstreamScore:
    symbol: str
    per_object: Mapping[ObjectName, float]
    per_category: Mapping[Category, float]
    total: float


DEFAULT_TIERS = {"none": 1.0, "one-off": 0.5, "regular": 0.1}

_AUDIT_ONLY = {
    ObjectName.PRICE_MANIPULATION,
    ObjectName.CODE_VULNERABILITY,
    ObjectName.FLASH_LOAN,
    ObjectName.ACCESS_CONTROL,
}


def _field(inputs: Mapping, name: str, key: str):
    try:
        return inputs[key]
    except KeyError:
        raise InputError(f"{name}: rubric input {key!r} is required") from None


def _tier(inputs: Mapping, name: str, key: str, tiers: Mapping[str, float]) -> float:
    value = str(_field(inputs, name, key)).strip().lower()
    try:
        return tiers[value]
    except KeyError:
        raise InputError(f"{name}: {key} tier {value!r} not in {sorted(tiers)}") from None


def _fraction(inputs: Mapping, name: str, key: str) -> float:
    value = float(_field(inputs, name, key))
    if not math.isfinite(value):
        raise InputError(f"{name}: {key} must be finite")
    return value


def metric_from_rubric(object_name: ObjectName | str, rubric_inputs: Mapping,
                       tiers: Mapping[str, float] = DEFAULT_TIERS) -> float:
    """Turn rubric observations into a metric in [0, 1] (1 = fully exposed).

    Recognised inputs: ``audit`` and ``attestation`` tiers (none / one-off /
    regular), ``concentration`` (top-holder fraction) and ``psd_normalized``.
    """
    name = ObjectName(object_name)
    label = name.value
    if name is ObjectName.MARKET_VOLATILITY:
        return min(1.0, max(0.0, _fraction(rubric_inputs, label, "psd_normalized")))
    if name in _AUDIT_ONLY:
        return _tier(rubric_inputs, label, "audit", tiers)
    if name is ObjectName.GOVERNANCE_ATTACK:
        conc = min(1.0, max(0.0, _fraction(rubric_inputs, label, "concentration")))
        return fmean([_tier(rubric_inputs, label, "audit", tiers), conc])
    if name is ObjectName.RUG_PULL:
        return fmean([_tier(rubric_inputs, label, "audit", tiers),
                      _tier(rubric_inputs, label, "attestation", tiers)])
    return _tier(rubric_inputs, label, "attestation", tiers)


def score_upstream(record: AssessmentRecord,
                   objects: Sequence[ImpactObject] | None = None,
                   scheme: WeightScheme | None = None) -> UpstreamScore:
    objects = default_impact_objects() if objects is None else list(objects)
    scheme = scheme or WeightScheme()
    per_object = {}
    for obj in objects:
        if obj.name not in record.metrics:
            raise InputError(f"{record.symbol}: no metric for {obj.name.value}")
        per_object[obj.name] = weight_of(obj.degree, scheme) * record.metrics[obj.name]
    per_category = {
        cat: math.fsum(v for obj, v in zip(objects, per_object.values()) if obj.category is cat)
        for cat in Category
    }
    return UpstreamScore(record.symbol, per_object, per_category, math.fsum(per_category.values()))


def rank_by_total(scores: Sequence[UpstreamScore]) -> list[UpstreamScore]:
    """Riskiest first; equal totals fall back to symbol order."""
    if not scores:
        raise InputError("nothing to rank")
    return sorted(scores, key=lambda s: (-s.total, s.symbol))


def peripheral_share(score: UpstreamScore) -> float | None:
    """Peripheral-factor fraction of the total, or ``None`` for a no-risk score."""
    if score.total == 0:
        return None
    return score.per_category[Category.PERIPHERAL_FACTOR] / score.total
