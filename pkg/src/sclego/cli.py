"""Batch command line: ``sclego {metrics,score,simulate,incidents}``.

Exit codes: 0 success, 2 input or config validation failure, 3 numeric failure
during simulation. Every command is a pure function of its inputs and flags.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import data_path
from .collateral import ReturnMode, build_comparison
from .dataio import (
    _split_preamble,
    _text,
    cause_histogram,
    fmt,
    load_controllers,
    load_manifest,
    load_scenario,
    load_weight_scheme,
    parse_holder_snapshot,
    parse_incidents,
    parse_inflation_config,
    parse_jurisdictions,
    parse_price_csv,
    parse_redemption_costs,
    parse_assessments,
)
from .dynamics import simulate
from .errors import ConfigError, InputError, SimulationError
from .model import WeightScheme
from .report import (
    CALIBRATION_FOOTER,
    build_report,
    comparison_csv,
    comparison_json,
    comparison_md,
    histogram_csv,
    histogram_md,
    write_report,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
CONFIG_ENV = "SCLEGO_CONFIG"
CONFIG_KEYS = {"out", "format", "weight_scheme", "archetype_threshold", "scale", "mode"}
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
DEPEG_BAND = 0.2


# -- helpers -------------------------------------------------------------------

def _read(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except IsADirectoryError:
        raise InputError(f"expected a file, got a directory: {path}") from None


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        doc = json.loads(_text(_read(path)))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    extra = set(doc) - CONFIG_KEYS
    if extra:
        raise ConfigError(f"config {path}: unknown keys {sorted(extra)}")
    return doc


def _formats(args, config: dict, default: str, allowed: Sequence[str]) -> list[str]:
    raw = args.format or config.get("format") or default
    if isinstance(raw, list):
        raw = ",".join(raw)
    out = []
    for f in (x.strip() for x in raw.split(",")):
        if f not in allowed:
            raise ConfigError(f"unsupported format {f!r}; choose from {', '.join(allowed)}")
        if f not in out:
            out.append(f)
    return out


def _out_dir(args, config: dict) -> Path:
    out = Path(args.out or config.get("out") or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out} is not writable")
    return out


def _emit(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    print(path)


def _verify_packaged() -> None:
    load_manifest(Path(str(data_path("MANIFEST.json"))))


# -- commands ------------------------------------------------------------------

def cmd_metrics(args, config: dict) -> int:
    if args.inputs is None:
        _verify_packaged()
        inputs = Path(str(data_path("table1", "metrics.json")))
    else:
        inputs = Path(args.inputs)
    try:
        spec = json.loads(_text(_read(inputs)))
        base = inputs.parent
        series = {a: parse_price_csv(_read(base / p), asset=a) for a, p in spec["prices"].items()}
        costs = parse_redemption_costs(_read(base / spec["redemption"]))
        juris = parse_jurisdictions(_read(base / spec["jurisdictions"]))
        inflation, labels = parse_inflation_config(_read(base / spec["inflation"]))
    except json.JSONDecodeError as exc:
        raise InputError(f"{inputs}: invalid JSON: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise InputError(f"{inputs}: missing entry {exc}") from None
    try:
        mode = ReturnMode(args.mode or config.get("mode") or spec.get("mode", "Approx"))
    except ValueError:
        raise ConfigError(f"unknown return mode; choose from {', '.join(m.value for m in ReturnMode)}") from None
    table = build_comparison(series, costs, inflation, juris, labels, mode)
    out = _out_dir(args, config)
    writers = {"md": comparison_md, "csv": comparison_csv, "json": comparison_json}
    for f in _formats(args, config, "json,csv,md", tuple(writers)):
        _emit(out / f"table1.{f}", writers[f](table))
    return EXIT_OK


def _scheme(args, config: dict) -> WeightScheme:
    if args.scheme:
        scheme = load_weight_scheme(_read(args.scheme))
    elif "weight_scheme" in config:
        scheme = load_weight_scheme(config["weight_scheme"])
    else:
        scheme = WeightScheme()
    scale = args.scale if args.scale is not None else config.get("scale")
    if scale is not None:
        scale = float(scale)
        if not (scale > 0 and math.isfinite(scale)):
            raise ConfigError("--scale must be a positive finite number")
        scheme = scheme.with_scale(scheme.scale * scale)
    return scheme


def cmd_score(args, config: dict) -> int:
    if args.dataset is None and args.assessments is None:
        _verify_packaged()
        dataset = Path(str(data_path("paper-2025")))
    else:
        dataset = Path(args.dataset) if args.dataset else None
    assess_path = Path(args.assessments) if args.assessments else dataset / "assessments.csv"
    snap_dir = Path(args.snapshots) if args.snapshots else (dataset / "snapshots" if dataset else None)
    raw = _read(assess_path)
    records = parse_assessments(raw)
    meta, _, _ = _split_preamble(_text(raw))
    snapshots = {}
    for rec in records:
        path = snap_dir / f"{rec.symbol}.csv" if snap_dir else None
        if path is not None and path.is_file():
            snap = parse_holder_snapshot(_read(path))
            if snap.symbol != rec.symbol:
                raise InputError(f"{path}: snapshot is for {snap.symbol}, expected {rec.symbol}")
            snapshots[rec.symbol] = snap
    threshold = args.threshold if args.threshold is not None else float(config.get("archetype_threshold", 0.5))
    if not 0 < threshold <= 1:
        raise ConfigError("archetype threshold must be in (0, 1]")
    if args.footer is not None:
        footer = args.footer
    else:
        footer = CALIBRATION_FOOTER if "dataset" in meta else ""
    report, warnings = build_report(records, snapshots, _scheme(args, config), threshold, footer)
    for w in warnings:
        print(f"sclego: warning: {w}", file=sys.stderr)
    out = _out_dir(args, config)
    for f in _formats(args, config, "json,csv,md", ("json", "csv", "md")):
        _emit(out / f"report.{f}", write_report(report, f))
    return EXIT_OK


def _parse_seeds(text: str) -> tuple[int, ...]:
    seeds = []
    try:
        for part in text.split(","):
            if "-" in part.strip()[1:]:
                lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}; use e.g. 1,2,5-9") from None
    return tuple(seeds)


def _resolve_scenario(name: str) -> Path:
    path = Path(name)
    if path.is_file():
        return path
    packaged = Path(str(data_path("scenarios", f"{name}.json")))
    if packaged.is_file():
        _verify_packaged()
        return packaged
    raise InputError(f"no such scenario file or packaged scenario: {name}")


def summarize(terminal: Sequence[float], peg: float, halted_final: Sequence[bool],
              halted_any: Sequence[bool]) -> dict:
    dev = np.abs(np.asarray(terminal, dtype=float) - peg)
    out = {
        "seeds": int(dev.size),
        "peg": peg,
        "terminal_price_mean": float(np.mean(terminal)) if dev.size else None,
        "abs_deviation": {
            "min": float(dev.min()) if dev.size else None,
            "max": float(dev.max()) if dev.size else None,
            **{f"q{int(q * 100):02d}": (float(np.quantile(dev, q)) if dev.size else None) for q in QUANTILES},
        },
        "depegged": int(np.sum(dev > DEPEG_BAND)),
        "halted_at_end": int(sum(halted_final)),
        "halted_any_step": int(sum(halted_any)),
    }
    return out


def _summary_md(name: str, summaries: dict) -> bytes:
    cols = ["min", *(f"q{int(q * 100):02d}" for q in QUANTILES), "max"]
    lines = [f"Scenario `{name}`: terminal |P - peg| over seeds; depegged means beyond {DEPEG_BAND}.", "",
             "| Run | Seeds | " + " | ".join(cols) + " | Depegged | Halted at end | Halted any step |",
             "|:---|---:|" + "---:|" * (len(cols) + 3)]
    for run, s in summaries.items():
        cells = [fmt(s["abs_deviation"][c], 4) if s["abs_deviation"][c] is not None else "" for c in cols]
        lines.append(f"| {run} | {s['seeds']} | " + " | ".join(cells)
                     + f" | {s['depegged']} | {s['halted_at_end']} | {s['halted_any_step']} |")
    return ("\n".join(lines) + "\n").encode()


def _summary_csv(summaries: dict) -> bytes:
    cols = ["min", *(f"q{int(q * 100):02d}" for q in QUANTILES), "max"]
    lines = ["run,seeds," + ",".join(cols) + ",depegged,halted_at_end,halted_any_step"]
    for run, s in summaries.items():
        vals = ["" if s["abs_deviation"][c] is None else repr(s["abs_deviation"][c]) for c in cols]
        lines.append(",".join([run, str(s["seeds"]), *vals, str(s["depegged"]),
                               str(s["halted_at_end"]), str(s["halted_any_step"])]))
    return ("\n".join(lines) + "\n").encode()


def cmd_simulate(args, config: dict) -> int:
    scenario = load_scenario(_read(_resolve_scenario(args.scenario)))
    runs = dict(scenario.runs) if scenario.runs else {"default": scenario}
    if args.run:
        missing = [r for r in args.run if r not in runs]
        if missing:
            raise ConfigError(f"unknown run(s) {missing}; available: {', '.join(runs)}")
        runs = {r: runs[r] for r in args.run}
    override = load_controllers(_read(args.controllers)) if args.controllers else None
    formats = _formats(args, config, "json,md", ("json", "md", "csv"))
    out = _out_dir(args, config)
    summaries = {}
    for run_name, run in runs.items():
        controllers = override if override is not None else run.controllers
        seeds = _parse_seeds(args.seeds) if args.seeds else run.seeds or (run.config.seed,)
        if args.seed_count is not None:
            seeds = seeds[: args.seed_count]
        terminal, halted_final, halted_any = [], [], []
        for seed in seeds:
            try:
                traj = simulate(run.config, controllers, run.initial, seed)
            except SimulationError as exc:
                raise SimulationError(f"run {run_name}, seed {seed}: {exc.args[0]}", exc.step) from None
            terminal.append(traj.final.price)
            halted_final.append(traj.final.halted)
            halted_any.append(any(s.halted for s in traj.states))
            if not args.summary_only:
                stem = scenario.name if run_name == "default" else f"{scenario.name}_{run_name}"
                _emit(out / "trajectories" / f"{stem}_seed{seed}.csv", traj.to_csv())
        summaries[run_name] = summarize(terminal, run.config.peg_target, halted_final, halted_any)
    doc = {"scenario": scenario.name, "runs": summaries}
    for f in formats:
        if f == "json":
            data = (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
        elif f == "md":
            data = _summary_md(scenario.name, summaries)
        else:
            data = _summary_csv(summaries)
        _emit(out / f"summary.{f}", data)
    return EXIT_OK


def cmd_incidents(args, config: dict) -> int:
    if args.incidents is None:
        _verify_packaged()
        path = Path(str(data_path("incidents.csv")))
    else:
        path = Path(args.incidents)
    raw = _read(path)
    records = parse_incidents(raw) if raw.strip() else []
    counts = cause_histogram(records)
    total = len(records)
    out = _out_dir(args, config)
    for f in _formats(args, config, "csv,md", ("csv", "md", "json")):
        if f == "csv":
            data = histogram_csv(counts, total)
        elif f == "md":
            data = histogram_md(counts, total)
        else:
            data = (json.dumps({"incidents": total,
                                "causes": {o.value: {"count": n, "percent": fmt(100 * n / total, 2)}
                                           for o, n in counts.items()}},
                               indent=2, sort_keys=True) + "\n").encode()
        _emit(out / f"incidents.{f}", data)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory (default: .)")
    p.add_argument("--format", metavar="LIST", default=argparse.SUPPRESS,
                   help="comma-separated output formats, e.g. json,csv,md")
    p.add_argument("--config", metavar="FILE", default=argparse.SUPPRESS,
                   help=f"JSON config file (default: ${CONFIG_ENV})")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="sclego", parents=[common],
                                     description="Stablecoin collateral metrics, risk scoring and peg simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", parents=[common], help="collateral comparison table")
    p.add_argument("inputs", nargs="?", help="metrics input JSON (default: packaged table1 fixture)")
    p.add_argument("--mode", choices=[m.value for m in ReturnMode], help="real-return formula")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("score", parents=[common], help="upstream/downstream risk report")
    p.add_argument("--dataset", metavar="DIR", help="directory with assessments.csv and snapshots/")
    p.add_argument("--assessments", metavar="FILE")
    p.add_argument("--snapshots", metavar="DIR")
    p.add_argument("--scheme", metavar="FILE", help="weight scheme JSON")
    p.add_argument("--scale", type=float, help="multiply every weight by this factor")
    p.add_argument("--threshold", type=float, help="archetype dominance threshold (default 0.5)")
    p.add_argument("--footer", help="report footer text")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", parents=[common], help="peg-dynamics seed sweep")
    p.add_argument("scenario", help="scenario JSON path or packaged scenario name")
    p.add_argument("--run", action="append", help="named run to execute (repeatable; default all)")
    p.add_argument("--controllers", metavar="FILE", help="controller list JSON replacing the scenario's")
    p.add_argument("--seeds", help="seed list, e.g. 1,2,10-20 (default: scenario seeds)")
    p.add_argument("--seed-count", type=int, help="use only the first N seeds")
    p.add_argument("--summary-only", action="store_true", help="skip per-seed trajectory CSVs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("incidents", parents=[common], help="root-cause histogram")
    p.add_argument("incidents", nargs="?", help="incident CSV (default: packaged fixture)")
    p.set_defaults(func=cmd_incidents)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("out", "format", "config"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except SimulationError as exc:
        print(f"sclego: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ConfigError, ValueError) as exc:
        print(f"sclego: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
