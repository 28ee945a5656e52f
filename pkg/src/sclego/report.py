"""Risk reports and table renderers (JSON, CSV, markdown).

JSON and CSV carry full-precision values and read back to the same object;
markdown is display-only and mirrors the published table layouts.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .collateral import METRICS, ComparisonTable
from .dataio import _json, _num, _text, fmt
from .downstream import Archetype, ArchetypeKind, HolderSnapshot, TokenShareVector, classify_archetype, token_shares
from .errors import InputError
from .model import CATEGORY_OF, LABELED_CATEGORIES, Category, HolderCategory, ObjectName, WeightScheme
from .upstream import AssessmentRecord, UpstreamScore, peripheral_share, rank_by_total, score_upstream

CATEGORY_HEADINGS = {
    Category.PRICE_FLUCTUATION: "Price fluctuation",
    Category.SMART_CONTRACT_ISSUE: "Smart contract issue",
    Category.PERIPHERAL_FACTOR: "Peripheral factor",
}
HOLDER_HEADINGS = {
    HolderCategory.EXCHANGE: "Exchange",
    HolderCategory.ASSET_MANAGEMENT: "Asset management",
    HolderCategory.DEFI_PROTOCOL: "DeFi protocol",
    HolderCategory.BLOCKCHAIN_INFRASTRUCTURE: "Blockchain infrastructure",
    HolderCategory.WHALE_RETAIL: "Whale/retail",
}
CALIBRATION_FOOTER = (
    "Metric values in this dataset were fitted offline so that the engine reproduces the "
    "published category scores and token shares; treat this run as a regression check, "
    "not an independent assessment. Total is the sum of the three categories; "
    "Reported total is the published figure, shown for reference only."
)


@dataclass(frozen=True)
class ReportEntry:
    upstream: UpstreamScore
    shares: TokenShareVector | None = None
    archetype: Archetype | None = None
    reported_total: float | None = None

    @property
    def symbol(self) -> str:
        return self.upstream.symbol

    @property
    def peripheral_share(self) -> float | None:
        return peripheral_share(self.upstream)


@dataclass(frozen=True)
class RiskReport:
    entries: tuple[ReportEntry, ...]
    scheme: WeightScheme = field(default_factory=WeightScheme)
    threshold: float = 0.5
    footer: str = ""

    def entry(self, symbol: str) -> ReportEntry:
        for e in self.entries:
            if e.symbol == symbol:
                return e
        raise KeyError(symbol)

    def least_risky(self) -> str:
        return rank_by_total([e.upstream for e in self.entries])[-1].symbol


def build_report(records: Sequence[AssessmentRecord], snapshots: Mapping[str, HolderSnapshot],
                 scheme: WeightScheme | None = None, threshold: float = 0.5,
                 footer: str = "") -> tuple[RiskReport, list[str]]:
    """Score every record; returns the report and warnings for missing snapshots."""
    scheme = scheme or WeightScheme()
    warnings = []
    entries = []
    for rec in records:
        score = score_upstream(rec, scheme=scheme)
        snap = snapshots.get(rec.symbol)
        if snap is None:
            warnings.append(f"{rec.symbol}: no holder snapshot; downstream vector omitted")
            entries.append(ReportEntry(score, reported_total=rec.reported_total))
            continue
        shares = token_shares(snap)
        entries.append(ReportEntry(score, shares, classify_archetype(shares, threshold), rec.reported_total))
    return RiskReport(tuple(entries), scheme, threshold, footer), warnings


# -- serialisation -------------------------------------------------------

def _entry_dict(e: ReportEntry) -> dict:
    share = e.peripheral_share
    d = {
        "symbol": e.symbol,
        "upstream": {
            "per_object": {o.value: e.upstream.per_object[o] for o in e.upstream.per_object},
            "per_category": {c.value: e.upstream.per_category[c] for c in Category},
            "total": e.upstream.total,
        },
        "peripheral_share": share if share is not None else "no-risk",
        "reported_total": e.reported_total,
    }
    if e.shares is not None:
        d["downstream"] = {
            "shares": {c.value: e.shares[c] for c in HolderCategory},
            "shares_pct": {c.value: fmt(100 * e.shares[c], 4) for c in HolderCategory},
            "coverage": e.shares.coverage,
        }
        d["archetype"] = {"kind": e.archetype.kind.value, "dominant_share": e.archetype.dominant_share}
    return d


def report_to_dict(report: RiskReport) -> dict:
    return {
        "format_version": "1",
        "weight_scheme": report.scheme.to_dict(),
        "archetype_threshold": report.threshold,
        "entries": [_entry_dict(e) for e in report.entries],
        "footer": report.footer,
    }


def _entry_from_dict(d: dict) -> ReportEntry:
    up = d["upstream"]
    score = UpstreamScore(
        d["symbol"],
        {ObjectName(k): float(v) for k, v in up["per_object"].items()},
        {Category(k): float(v) for k, v in up["per_category"].items()},
        float(up["total"]),
    )
    shares = archetype = None
    if "downstream" in d:
        shares = TokenShareVector({HolderCategory(k): float(v) for k, v in d["downstream"]["shares"].items()})
        archetype = Archetype(ArchetypeKind(d["archetype"]["kind"]), float(d["archetype"]["dominant_share"]))
    reported = d.get("reported_total")
    return ReportEntry(score, shares, archetype, None if reported is None else float(reported))


def report_from_dict(doc: dict) -> RiskReport:
    try:
        return RiskReport(
            tuple(_entry_from_dict(e) for e in doc["entries"]),
            WeightScheme.from_dict(doc["weight_scheme"]),
            float(doc["archetype_threshold"]),
            doc.get("footer", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed report: {exc}") from None


CSV_COLUMNS = (
    ["symbol"]
    + [f"up_{o.value}" for o in ObjectName]
    + [f"cat_{c.value}" for c in Category]
    + ["total", "reported_total"]
    + [f"dn_{c.value}" for c in HolderCategory]
    + ["archetype", "dominant_share"]
)


def _report_csv(report: RiskReport) -> bytes:
    buf = io.StringIO()
    buf.write(f"#scheme={json.dumps(report.scheme.to_dict(), sort_keys=True)}\n")
    buf.write(f"#archetype_threshold={_num(report.threshold)}\n")
    if report.footer:
        buf.write(f"#footer={report.footer}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in report.entries:
        up = e.upstream
        row = [e.symbol]
        row += [_num(up.per_object[o]) for o in ObjectName]
        row += [_num(up.per_category[c]) for c in Category]
        row += [_num(up.total), "" if e.reported_total is None else _num(e.reported_total)]
        if e.shares is None:
            row += [""] * (len(HolderCategory) + 2)
        else:
            row += [_num(e.shares[c]) for c in HolderCategory]
            row += [e.archetype.kind.value, _num(e.archetype.dominant_share)]
        w.writerow(row)
    return buf.getvalue().encode()


def _report_from_csv(data: bytes | str) -> RiskReport:
    lines = _text(data).splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        key, value = lines.pop(0).lstrip("#").split("=", 1)
        meta[key] = value
    rows = list(csv.reader(lines))
    if not rows or rows[0] != CSV_COLUMNS or {"scheme", "archetype_threshold"} - set(meta):
        raise InputError("report CSV header mismatch")
    entries = []
    for row in rows[1:]:
        d = dict(zip(CSV_COLUMNS, row))
        score = UpstreamScore(
            d["symbol"],
            {o: float(d[f"up_{o.value}"]) for o in ObjectName},
            {c: float(d[f"cat_{c.value}"]) for c in Category},
            float(d["total"]),
        )
        shares = archetype = None
        if d["archetype"]:
            shares = TokenShareVector({c: float(d[f"dn_{c.value}"]) for c in HolderCategory})
            archetype = Archetype(ArchetypeKind(d["archetype"]), float(d["dominant_share"]))
        reported = float(d["reported_total"]) if d["reported_total"] else None
        entries.append(ReportEntry(score, shares, archetype, reported))
    return RiskReport(tuple(entries), WeightScheme.from_dict(json.loads(meta["scheme"])),
                      float(meta["archetype_threshold"]), meta.get("footer", ""))


def _bold(text: str, on: bool) -> str:
    return f"**{text}**" if on else text


def _report_md(report: RiskReport) -> bytes:
    heads = (["Stablecoin"] + [CATEGORY_HEADINGS[c] for c in Category] + ["Total"]
             + [HOLDER_HEADINGS[c] for c in LABELED_CATEGORIES])
    lines = ["| " + " | ".join(heads) + " |", "|" + "|".join([":---"] + ["---:"] * (len(heads) - 1)) + "|"]
    least = report.least_risky() if report.entries else None
    for e in report.entries:
        up = e.upstream
        cells = [e.symbol] + [fmt(up.per_category[c], 4) for c in Category]
        cells.append(_bold(fmt(up.total, 4), e.symbol == least))
        dominant = None
        if e.archetype is not None and e.archetype.kind is not ArchetypeKind.MIXED:
            dominant = max(LABELED_CATEGORIES, key=lambda c: e.shares[c])
        shares = e.shares or TokenShareVector.empty()
        cells += [_bold(fmt(100 * shares[c], 4), c is dominant) for c in LABELED_CATEGORIES]
        lines.append("| " + " | ".join(cells) + " |")
    lines += ["", "| Stablecoin | Archetype | Peripheral share | Unlabeled | Coverage | Reported total |",
              "|:---|:---|---:|---:|---:|---:|"]
    for e in report.entries:
        share = e.peripheral_share
        shares = e.shares or TokenShareVector.empty()
        lines.append("| " + " | ".join([
            e.symbol,
            e.archetype.kind.value if e.archetype else "n/a",
            "no-risk" if share is None else fmt(100 * share, 2) + "%",
            fmt(100 * shares[HolderCategory.UNLABELED], 4),
            fmt(100 * shares.coverage, 4),
            "" if e.reported_total is None else fmt(e.reported_total, 4),
        ]) + " |")
    if report.footer:
        lines += ["", report.footer]
    return ("\n".join(lines) + "\n").encode()


def write_report(report: RiskReport, format: str) -> bytes:
    if format == "json":
        return (json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n").encode()
    if format == "csv":
        return _report_csv(report)
    if format == "md":
        return _report_md(report)
    raise ValueError(f"unknown report format {format!r}")


def read_report(data: bytes | str, format: str) -> RiskReport:
    if format == "json":
        return report_from_dict(_json(data))
    if format == "csv":
        return _report_from_csv(data)
    raise ValueError(f"cannot read report format {format!r}")


# -- collateral comparison ---------------------------------------------------

METRIC_HEADINGS = {
    "psd": "Volatility (PSD)",
    "rei": "Redemption efficiency (REI)",
    "real_return": "Inflation resistance (r)",
    "j_score": "Compliance (J-Score)",
}


def _metric_cells(table: ComparisonTable, row) -> list[str]:
    return [
        fmt(row.psd, 2),
        fmt(row.rei, 4),
        fmt(100 * row.real_return, 2),
        fmt(row.j_score, 0) if float(row.j_score).is_integer() else fmt(row.j_score, 2),
    ]


def comparison_md(table: ComparisonTable) -> bytes:
    lines = ["| | " + " | ".join(METRIC_HEADINGS[m] for m in METRICS) + " |",
             "|:---|" + "|".join(["---:"] * len(METRICS)) + "|"]
    for row in table.rows:
        cells = [_bold(c, table.is_best(row.asset, m)) for c, m in zip(_metric_cells(table, row), METRICS)]
        lines.append(f"| {row.label} | " + " | ".join(cells) + " |")
    lines += ["", "Bold marks the better values per column: lowest PSD and REI, any positive r, "
              "highest J-Score. r is in percentage points."]
    return ("\n".join(lines) + "\n").encode()


def comparison_csv(table: ComparisonTable) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["asset", "label", *METRICS, *(f"best_{m}" for m in METRICS)])
    for r in table.rows:
        w.writerow([r.asset, r.label, *(_num(getattr(r, m)) for m in METRICS),
                    *(int(table.is_best(r.asset, m)) for m in METRICS)])
    return buf.getvalue().encode()


def comparison_json(table: ComparisonTable) -> bytes:
    doc = {
        "rows": [
            {"asset": r.asset, "label": r.label, **{m: getattr(r, m) for m in METRICS},
             "formatted": dict(zip(METRICS, _metric_cells(table, r)))}
            for r in table.rows
        ],
        "best": {m: sorted(table.best[m]) for m in METRICS},
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


def histogram_csv(counts: Mapping[ObjectName, int], total: int) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cause", "category", "incidents", "percent"])
    for o, n in counts.items():
        w.writerow([o.value, CATEGORY_OF[o].value, n, fmt(100 * n / total, 2)])
    return buf.getvalue().encode()


def histogram_md(counts: Mapping[ObjectName, int], total: int) -> bytes:
    lines = ["| Cause | Category | Incidents | Share (%) |", "|:---|:---|---:|---:|"]
    for o, n in counts.items():
        lines.append(f"| {o.value} | {CATEGORY_OF[o].value} | {n} | {fmt(100 * n / total, 2)} |")
    lines += ["", f"{total} incidents; an incident with several root causes counts once for each."]
    return ("\n".join(lines) + "\n").encode()
