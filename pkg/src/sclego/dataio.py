"""Strict parsers and serializers for every on-disk format.

All tabular inputs are UTF-8 CSV. Parsers reject rather than coerce: a missing
column, an unparseable number or an unknown label raises :class:`InputError`
with the offending line number (the header is line 1, preamble lines count).
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .collateral import InflationInputs, JurisdictionTable, PriceSeries, RedemptionCosts
from .downstream import Holder, HolderSnapshot
from .dynamics import Controller, ScenarioConfig, SimState
from .errors import ConfigError, InputError
from .model import (
    CollateralClass,
    HolderCategory,
    Mechanism,
    ObjectName,
    StablecoinProfile,
    WeightScheme,
    YieldSource,
)
from .upstream import AssessmentRecord

FORMAT_VERSION = "1"
INCIDENT_LOSS_FLOOR = 100_000
INCIDENT_FIRST_YEAR = 2017


def fmt(x: float, places: int) -> str:
    """Round-half-even on the shortest decimal representation of ``x``."""
    q = Decimal(1).scaleb(-places)
    out = Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_EVEN)
    if out == 0:
        out = abs(out)
    return f"{out:f}"


def _text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"not UTF-8: {exc}") from None
    return data


def _split_preamble(text: str) -> tuple[dict[str, tuple[str, int]], list[str], int]:
    """Strip ``#key=value`` lines; returns (meta, remaining lines, first line number)."""
    lines = text.splitlines()
    meta: dict[str, tuple[str, int]] = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:]
        if "=" not in body:
            raise InputError(f"line {i + 1}: preamble must be #key=value")
        key, value = body.split("=", 1)
        key = key.strip()
        if key in meta:
            raise InputError(f"line {i + 1}: duplicate preamble key {key!r}")
        meta[key] = (value.strip(), i + 1)
        i += 1
    return meta, lines[i:], i + 1


def _rows(lines: list[str], header: Sequence[str], first_line: int,
          optional: Sequence[str] = ()) -> Iterable[tuple[int, dict[str, str]]]:
    if not lines or not lines[0].strip():
        raise InputError(f"line {first_line}: missing header {','.join(header)}")
    reader = csv.reader(lines)
    got = [h.strip() for h in next(reader)]
    allowed = list(header) + list(optional)
    if got[: len(header)] != list(header) or any(h not in allowed for h in got) or len(set(got)) != len(got):
        raise InputError(f"line {first_line}: expected header {','.join(header)}, got {','.join(got)}")
    for offset, row in enumerate(reader, start=1):
        lineno = first_line + offset
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(got):
            raise InputError(f"line {lineno}: expected {len(got)} fields, got {len(row)}")
        yield lineno, dict(zip(got, (c.strip() for c in row)))


def _float(value: str, lineno: int, name: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise InputError(f"line {lineno}: {name} {value!r} is not a number") from None
    if not math.isfinite(out):
        raise InputError(f"line {lineno}: {name} must be finite")
    return out


def _date(value: str, lineno: int, name: str = "date") -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except ValueError:
        raise InputError(f"line {lineno}: {name} {value!r} is not an ISO-8601 date") from None


def _csv_bytes(header: Sequence[str], rows: Iterable[Sequence], preamble: Sequence[str] = ()) -> bytes:
    buf = io.StringIO()
    for line in preamble:
        buf.write(f"#{line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _num(x: float) -> str:
    return repr(float(x))


# -- price series -----------------------------------------------------------

def parse_price_csv(data: bytes | str, asset: str = "", source_note: str = "") -> PriceSeries:
    meta, lines, first = _split_preamble(_text(data))
    asset = asset or meta.get("asset", ("", 0))[0]
    source_note = source_note or meta.get("source", ("", 0))[0]
    obs = []
    seen: dict[dt.date, int] = {}
    for lineno, row in _rows(lines, ("date", "close"), first):
        d = _date(row["date"], lineno)
        p = _float(row["close"], lineno, "close")
        if d in seen:
            raise InputError(f"line {lineno}: duplicate date {d} (first seen on line {seen[d]})")
        if obs and d < obs[-1][0]:
            raise InputError(f"line {lineno}: date {d} is earlier than previous date {obs[-1][0]}")
        if not p > 0:
            raise InputError(f"line {lineno}: close must be positive, got {p}")
        seen[d] = lineno
        obs.append((d, p))
    return PriceSeries(asset, tuple(obs), source_note)


def write_price_csv(series: PriceSeries) -> bytes:
    preamble = [f"asset={series.asset}"] + ([f"source={series.source_note}"] if series.source_note else [])
    return _csv_bytes(("date", "close"), ((d.isoformat(), _num(p)) for d, p in series.observations), preamble)


# -- holder snapshots -------------------------------------------------------

def _meta(meta: Mapping[str, tuple[str, int]], key: str) -> tuple[str, int]:
    try:
        return meta[key]
    except KeyError:
        raise InputError(f"missing preamble line #{key}=") from None


def parse_holder_snapshot(data: bytes | str) -> HolderSnapshot:
    meta, lines, first = _split_preamble(_text(data))
    symbol, _ = _meta(meta, "symbol")
    supply_text, supply_line = _meta(meta, "total_supply")
    taken_text, taken_line = _meta(meta, "taken_at")
    total_supply = _float(supply_text, supply_line, "total_supply")
    taken_at = _date(taken_text, taken_line, "taken_at")
    top_n = 1000
    if "top_n" in meta:
        text, lineno = meta["top_n"]
        if not text.isdigit():
            raise InputError(f"line {lineno}: top_n must be a positive integer")
        top_n = int(text)
    unknown = set(meta) - {"symbol", "total_supply", "taken_at", "top_n"}
    if unknown:
        raise InputError(f"unknown preamble keys {sorted(unknown)}")
    valid = [c.value for c in HolderCategory]
    holders = []
    seen: dict[str, int] = {}
    for lineno, row in _rows(lines, ("address", "balance", "category"), first):
        balance = _float(row["balance"], lineno, "balance")
        if not balance > 0:
            raise InputError(f"line {lineno}: balance must be positive, got {row['balance']}")
        if row["category"] not in valid:
            raise InputError(f"line {lineno}: unknown category {row['category']!r}; valid: {', '.join(valid)}")
        if row["address"] in seen:
            raise InputError(f"line {lineno}: duplicate address {row['address']} (line {seen[row['address']]})")
        seen[row["address"]] = lineno
        holders.append(Holder(row["address"], balance, HolderCategory(row["category"])))
    return HolderSnapshot(symbol, taken_at, total_supply, tuple(holders), top_n)


def write_holder_snapshot(snapshot: HolderSnapshot) -> bytes:
    preamble = [
        f"symbol={snapshot.symbol}",
        f"total_supply={_num(snapshot.total_supply)}",
        f"taken_at={snapshot.taken_at.isoformat()}",
        f"top_n={snapshot.top_n}",
    ]
    rows = ((h.address, _num(h.balance), h.category.value) for h in snapshot.holders)
    return _csv_bytes(("address", "balance", "category"), rows, preamble)


# -- assessments ------------------------------------------------------------

def parse_assessments(data: bytes | str) -> list[AssessmentRecord]:
    """Long format: one ``symbol,as_of,object,metric,evidence`` row per object.

    Optional preamble ``#reported_total.SYMBOL=value`` carries a published total
    for display next to the computed one.
    """
    meta, lines, first = _split_preamble(_text(data))
    reported = {}
    for key, (value, lineno) in meta.items():
        if not key.startswith("reported_total."):
            if key in ("dataset", "note"):
                continue
            raise InputError(f"line {lineno}: unknown preamble key {key!r}")
        reported[key.split(".", 1)[1]] = _float(value, lineno, key)
    grouped: dict[str, dict] = {}
    valid = [o.value for o in ObjectName]
    for lineno, row in _rows(lines, ("symbol", "as_of", "object", "metric", "evidence"), first):
        sym = row["symbol"]
        if row["object"] not in valid:
            raise InputError(f"line {lineno}: unknown impact object {row['object']!r}; valid: {', '.join(valid)}")
        entry = grouped.setdefault(sym, {"as_of": _date(row["as_of"], lineno, "as_of"), "metrics": {}, "evidence": {}})
        if _date(row["as_of"], lineno, "as_of") != entry["as_of"]:
            raise InputError(f"line {lineno}: {sym} has more than one as_of date")
        obj = ObjectName(row["object"])
        if obj in entry["metrics"]:
            raise InputError(f"line {lineno}: duplicate {obj.value} for {sym}")
        entry["metrics"][obj] = _float(row["metric"], lineno, "metric")
        entry["evidence"][obj] = row["evidence"]
    unmatched = set(reported) - set(grouped)
    if unmatched:
        raise InputError(f"reported totals for unknown symbols {sorted(unmatched)}")
    return [
        AssessmentRecord(sym, e["metrics"], e["as_of"], e["evidence"], reported.get(sym))
        for sym, e in grouped.items()
    ]


def write_assessments(records: Sequence[AssessmentRecord]) -> bytes:
    preamble = [f"reported_total.{r.symbol}={_num(r.reported_total)}" for r in records if r.reported_total is not None]
    rows = []
    for r in records:
        for obj in ObjectName:
            rows.append((r.symbol, r.as_of.isoformat(), obj.value, _num(r.metrics[obj]), r.evidence.get(obj, "")))
    return _csv_bytes(("symbol", "as_of", "object", "metric", "evidence"), rows, preamble)


# -- collateral metric inputs -----------------------------------------------

def parse_redemption_costs(data: bytes | str) -> list[RedemptionCosts]:
    meta, lines, first = _split_preamble(_text(data))
    out = []
    for lineno, row in _rows(lines, ("asset", "fee_usd", "delay_days"), first):
        try:
            out.append(RedemptionCosts(row["asset"], _float(row["fee_usd"], lineno, "fee_usd"),
                                       _float(row["delay_days"], lineno, "delay_days")))
        except InputError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    return out


def write_redemption_costs(costs: Sequence[RedemptionCosts]) -> bytes:
    return _csv_bytes(("asset", "fee_usd", "delay_days"),
                      ((c.asset, _num(c.fee_usd), _num(c.delay_days)) for c in costs))


def parse_jurisdictions(data: bytes | str) -> JurisdictionTable:
    """Header ``jurisdiction,weight,<asset>...``; one row per jurisdiction, 0/1 cells."""
    meta, lines, first = _split_preamble(_text(data))
    if not lines:
        raise InputError("missing header jurisdiction,weight,...")
    header = next(csv.reader(lines[:1]))
    assets = [h.strip() for h in header[2:]]
    if not assets:
        raise InputError(f"line {first}: no asset columns")
    names, comp = [], {a: [] for a in assets}
    for lineno, row in _rows(lines, ("jurisdiction", "weight", *assets), first):
        names.append((row["jurisdiction"], _float(row["weight"], lineno, "weight")))
        for a in assets:
            if row[a] not in ("0", "1"):
                raise InputError(f"line {lineno}: compliance for {a} must be 0 or 1, got {row[a]!r}")
            comp[a].append(int(row[a]))
    return JurisdictionTable(tuple(names), {a: tuple(v) for a, v in comp.items()})


def write_jurisdictions(table: JurisdictionTable) -> bytes:
    assets = list(table.compliance)
    rows = ((name, _num(w), *(table.compliance[a][k] for a in assets))
            for k, (name, w) in enumerate(table.jurisdictions))
    return _csv_bytes(("jurisdiction", "weight", *assets), rows)


def parse_inflation_config(data: bytes | str) -> tuple[dict[str, InflationInputs], dict[str, str]]:
    """JSON ``{"inflation": pi, "assets": {id: {"nominal_return": i, "label": str}}}``."""
    doc = _json(data)
    try:
        pi = float(doc["inflation"])
        assets = doc["assets"]
        inputs = {a: InflationInputs(float(v["nominal_return"]), pi) for a, v in assets.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad inflation config: {exc}") from None
    return inputs, {a: str(v.get("label", a)) for a, v in assets.items()}


# -- incidents --------------------------------------------------------------

@dataclass(frozen=True)
class IncidentRecord:
    project: str
    stablecoin: str
    blockchain: str
    year: int
    loss_usd: float
    root_causes: frozenset[ObjectName]
    no: int = 0

    def __post_init__(self):
        if not self.loss_usd > INCIDENT_LOSS_FLOOR:
            raise InputError(f"{self.project}: loss {self.loss_usd} does not exceed the $100K admission floor")
        if self.year < INCIDENT_FIRST_YEAR:
            raise InputError(f"{self.project}: year {self.year} precedes {INCIDENT_FIRST_YEAR}")
        if not self.root_causes:
            raise InputError(f"{self.project}: no root cause")


INCIDENT_HEADER = ("no", "project", "stablecoin", "blockchain", "year", "loss_usd", "root_causes")


def parse_incidents(data: bytes | str) -> list[IncidentRecord]:
    text = _text(data)
    if not text.strip():
        return []
    meta, lines, first = _split_preamble(text)
    valid = [o.value for o in ObjectName]
    out = []
    for lineno, row in _rows(lines, INCIDENT_HEADER, first):
        causes = [c.strip() for c in row["root_causes"].split(";") if c.strip()]
        bad = [c for c in causes if c not in valid]
        if bad:
            raise InputError(f"line {lineno}: unknown root causes {bad}; valid: {', '.join(valid)}")
        if len(set(causes)) != len(causes):
            raise InputError(f"line {lineno}: repeated root cause")
        try:
            year = int(row["year"])
            no = int(row["no"])
        except ValueError:
            raise InputError(f"line {lineno}: no and year must be integers") from None
        try:
            out.append(IncidentRecord(row["project"], row["stablecoin"], row["blockchain"], year,
                                      _float(row["loss_usd"], lineno, "loss_usd"),
                                      frozenset(ObjectName(c) for c in causes), no))
        except InputError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    return out


def write_incidents(records: Sequence[IncidentRecord]) -> bytes:
    order = list(ObjectName)
    rows = ((r.no, r.project, r.stablecoin, r.blockchain, r.year, _int_or_float(r.loss_usd),
             ";".join(c.value for c in sorted(r.root_causes, key=order.index))) for r in records)
    return _csv_bytes(INCIDENT_HEADER, rows)


def _int_or_float(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else _num(x)


def cause_histogram(records: Sequence[IncidentRecord]) -> dict[ObjectName, int]:
    """Incidents per cause; a multi-cause incident counts once for each cause."""
    counts = Counter(c for r in records for c in r.root_causes)
    return {o: counts[o] for o in ObjectName if counts[o]}


def cause_percentages(records: Sequence[IncidentRecord]) -> dict[ObjectName, float]:
    """Per-cause share of incidents (denominator: number of incidents)."""
    if not records:
        return {}
    return {o: 100.0 * n / len(records) for o, n in cause_histogram(records).items()}


# -- stablecoin reference list ------------------------------------------------

STABLECOIN_HEADER = ("no", "project", "symbol", "market_cap_usd", "peg_currency", "collateral_classes",
                     "mechanisms", "yield_rate", "yield_sources")


def _enum_set(enum, text: str, lineno: int, name: str) -> frozenset:
    out = set()
    for part in (p.strip() for p in text.split(";") if p.strip()):
        try:
            out.add(enum(part))
        except ValueError:
            raise InputError(f"line {lineno}: unknown {name} {part!r}; valid: {[e.value for e in enum]}") from None
    return frozenset(out)


def parse_stablecoins(data: bytes | str) -> list[StablecoinProfile]:
    """Reference list; an empty ``yield_rate`` is an undisclosed rate and an empty
    ``yield_sources`` with positive yield means the source is undisclosed."""
    meta, lines, first = _split_preamble(_text(data))
    out = []
    for lineno, row in _rows(lines, STABLECOIN_HEADER, first):
        rate = None if row["yield_rate"] == "" else _float(row["yield_rate"], lineno, "yield_rate")
        sources = _enum_set(YieldSource, row["yield_sources"], lineno, "yield source")
        try:
            out.append(StablecoinProfile(
                symbol=row["symbol"],
                peg_currency=row["peg_currency"],
                collateral_classes=_enum_set(CollateralClass, row["collateral_classes"], lineno, "collateral class"),
                mechanisms=_enum_set(Mechanism, row["mechanisms"], lineno, "mechanism"),
                yield_rate=rate,
                yield_sources=sources,
                market_cap=_float(row["market_cap_usd"], lineno, "market_cap_usd"),
                project=row["project"],
                yield_sources_disclosed=bool(sources) or not rate,
            ))
        except InputError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    return out


# -- configs ---------------------------------------------------------------

def _json(data: bytes | str | Mapping) -> dict:
    if isinstance(data, Mapping):
        return dict(data)
    try:
        doc = json.loads(_text(data))
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError("expected a JSON object")
    return doc


def load_weight_scheme(data: bytes | str | Mapping) -> WeightScheme:
    """A weight scheme from JSON; every degree must end up with a positive weight."""
    doc = _json(data)
    doc = doc.get("weight_scheme", doc)
    scheme = WeightScheme.from_dict(doc)
    scheme.check_positive()
    return scheme


@dataclass(frozen=True)
class Scenario:
    name: str
    config: ScenarioConfig
    initial: SimState
    controllers: tuple[Controller, ...] = ()
    seeds: tuple[int, ...] = ()
    runs: Mapping[str, "Scenario"] | None = None


_STATE_KEYS = set(SimState.__dataclass_fields__)
_CONFIG_KEYS = set(ScenarioConfig.__dataclass_fields__)


def _scenario_parts(name: str, config: dict, initial: dict, controllers: list, seeds: list) -> Scenario:
    extra = set(config) - _CONFIG_KEYS
    if extra:
        raise ConfigError(f"{name}: unknown config keys {sorted(extra)}")
    extra = set(initial) - _STATE_KEYS
    if extra:
        raise ConfigError(f"{name}: unknown initial-state keys {sorted(extra)}")
    try:
        cfg = ScenarioConfig(**config)
        state = SimState(**initial)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return Scenario(name, cfg, state, tuple(Controller.from_dict(c) for c in controllers),
                    tuple(int(s) for s in seeds))


def load_scenario(data: bytes | str | Mapping) -> Scenario:
    """Scenario JSON: ``config``, ``initial``, optional ``controllers``, ``seeds``
    and ``runs`` (named variants overriding any of the others)."""
    doc = _json(data)
    allowed = {"name", "description", "format_version", "config", "initial", "controllers", "seeds", "runs"}
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown scenario keys {sorted(extra)}")
    if "config" not in doc:
        raise ConfigError("scenario needs a config block")
    name = str(doc.get("name", "scenario"))
    base_cfg, base_init = dict(doc["config"]), dict(doc.get("initial", {}))
    base_ctrl, base_seeds = list(doc.get("controllers", [])), list(doc.get("seeds", []))
    runs = {}
    for run_name, run in doc.get("runs", {}).items():
        extra = set(run) - {"config", "initial", "controllers", "seeds", "description"}
        if extra:
            raise ConfigError(f"run {run_name}: unknown keys {sorted(extra)}")
        runs[run_name] = _scenario_parts(
            f"{name}/{run_name}",
            {**base_cfg, **run.get("config", {})},
            {**base_init, **run.get("initial", {})},
            run.get("controllers", base_ctrl),
            run.get("seeds", base_seeds),
        )
    top = _scenario_parts(name, base_cfg, base_init, base_ctrl, base_seeds)
    return Scenario(top.name, top.config, top.initial, top.controllers, top.seeds, runs or None)


def load_controllers(data: bytes | str) -> tuple[Controller, ...]:
    try:
        doc = json.loads(_text(data))
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from None
    if isinstance(doc, dict):
        doc = doc.get("controllers", [])
    if not isinstance(doc, list):
        raise ConfigError("controllers file must hold a list")
    return tuple(Controller.from_dict(c) for c in doc)


# -- manifest ----------------------------------------------------------------

def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class DatasetManifest:
    format_version: str
    files: Mapping[str, Mapping[str, str]]
    root: Path

    def verify(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise InputError(f"manifest format {self.format_version} unsupported (want {FORMAT_VERSION})")
        for rel, info in self.files.items():
            path = self.root / rel
            if not path.is_file():
                raise InputError(f"manifest lists missing file {rel}")
            digest = sha256_file(path)
            if digest != info["sha256"]:
                raise InputError(f"checksum mismatch for {rel}: {digest} != {info['sha256']}")

    def as_of(self, rel: str) -> str | None:
        return self.files[rel].get("as_of")


def load_manifest(path: Path, verify: bool = True) -> DatasetManifest:
    path = Path(path)
    doc = _json(path.read_bytes())
    try:
        manifest = DatasetManifest(str(doc["format_version"]), doc["files"], path.parent)
    except KeyError as exc:
        raise InputError(f"manifest missing {exc}") from None
    if verify:
        manifest.verify()
    return manifest


def write_manifest(root: Path, files: Mapping[str, str | None]) -> bytes:
    """Manifest JSON for ``{relative path: as_of}`` under ``root``."""
    entries = {rel: {"sha256": sha256_file(Path(root) / rel), **({"as_of": a} if a else {})}
               for rel, a in sorted(files.items())}
    return (json.dumps({"format_version": FORMAT_VERSION, "files": entries}, indent=2, sort_keys=True) + "\n").encode()
