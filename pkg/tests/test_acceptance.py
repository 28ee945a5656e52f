"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Expected values below are transcribed from the published tables and figures;
they are deliberately not read from the shipped fixtures.
"""

import csv
import io
import json
import math
import os
import random
import time
import urllib.request
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from sclego.collateral import PriceSeries, psd
from sclego.dataio import (
    load_scenario,
    parse_assessments,
    parse_holder_snapshot,
    parse_incidents,
    parse_jurisdictions,
    parse_price_csv,
    parse_redemption_costs,
    write_assessments,
    write_holder_snapshot,
    write_incidents,
    write_jurisdictions,
    write_price_csv,
    write_redemption_costs,
)
from sclego.dynamics import (
    Controller,
    ControllerKind as K,
    ScenarioConfig,
    Shock,
    SimState,
    liquidation_step,
    simulate,
    supply_adjust_step,
)
from sclego.report import read_report, write_report

from conftest import DATA, GOLDEN

# -- published values --------------------------------------------------------------

TABLE1 = {
    # label: (REI, r, J) as printed
    "USD (fiat currency)": ("0.9990", "-4.25", "21"),
    "Gold (RWA)": ("2.0000", "5.89", "21"),
    "Bitcoin (cryptocurrency)": ("0.0000", "5.78", "13"),
}
TABLE1_BOLD = {
    "USD (fiat currency)": {"psd", "j_score"},
    "Gold (RWA)": {"real_return", "j_score"},
    "Bitcoin (cryptocurrency)": {"rei", "real_return"},
}
TABLE7 = {
    "USDT": (2.1583, 3.7000, 5.7101, 53.2682, 4.4057, 0.6603, 6.6690, 13.7521),
    "USDC": (2.1583, 3.7000, 5.6553, 14.6538, 5.5597, 3.5957, 3.9556, 47.6325),
    "DAI": (1.9833, 3.4000, 5.4750, 2.0564, 3.3415, 25.0256, 6.3893, 47.7420),
    "USDS": (0.0001, 0.0000, 2.5000, 0.0417, 0.4356, 70.8696, 0.0000, 28.6523),
    "FDUSD": (2.0417, 3.5000, 5.4803, 96.7493, 0.0558, 0.0207, 0.0169, 3.1495),
    "USDe": (1.5167, 2.6000, 4.3366, 8.4785, 0.5660, 82.1671, 0.0634, 8.7129),
    "PYUSD": (4.1583, 3.7000, 5.6553, 17.6987, 9.9289, 1.3587, 0.1112, 70.7349),
    "USDD": (2.1000, 3.6000, 5.6500, 1.2696, 0.0054, 98.0634, 0.1439, 0.5097),
    "FRAX": (1.4583, 2.5000, 4.6875, 0.0165, 0.2029, 53.1922, 14.8037, 31.7717),
    "TUSD": (2.2167, 3.8000, 3.3250, 3.9264, 0.1905, 0.7820, 0.2251, 94.2145),
    "USDB": (2.3347, 4.0000, 6.0000, 0.0000, 0.0000, 12.0578, 0.0394, 82.5321),
}
CATEGORY_KEYS = ("PriceFluctuation", "SmartContractIssue", "PeripheralFactor")
HOLDER_KEYS = ("Exchange", "AssetManagement", "DefiProtocol", "BlockchainInfrastructure", "WhaleRetail")
FIG7_SLICES = [38.64, 27.27, 25.00, 9.09, 6.82, 4.55, 4.55, 2.27]
ARCHETYPES = {
    "DefiCentric": {"USDD", "USDS", "USDe", "FRAX"},
    "ExchangeCentric": {"USDT", "FDUSD"},
    "WhaleDominated": {"PYUSD", "TUSD", "USDB"},
    "Mixed": {"USDC", "DAI"},
}


def _md_cells(line):
    return [c.strip() for c in line.strip().strip("|").split("|")]


# -- 1 -------------------------------------------------------------------------------

def test_criterion_1_table1_regression(run_cli, criterion):
    start = time.perf_counter()
    code, out, _, _ = run_cli("metrics", "--format", "md,json")
    elapsed = time.perf_counter() - start
    lines = (out / "table1.md").read_text().splitlines()[2:5]
    problems = []
    metrics = ("psd", "rei", "real_return", "j_score")
    for line in lines:
        label, *cells = _md_cells(line)
        bold = {m for m, c in zip(metrics, cells) if c.startswith("**")}
        plain = [c.strip("*") for c in cells]
        if tuple(plain[1:]) != TABLE1[label]:
            problems.append(f"{label}: {plain[1:]} != {TABLE1[label]}")
        if bold != TABLE1_BOLD[label]:
            problems.append(f"{label}: bold {sorted(bold)} != {sorted(TABLE1_BOLD[label])}")
    golden_same = (out / "table1.md").read_bytes() == (GOLDEN / "table1.md").read_bytes()
    ok = code == 0 and not problems and golden_same and elapsed < 1.0
    criterion(1, ok, f"REI, r, J and bold cells match the published comparison; golden identical={golden_same}; "
                     f"{elapsed:.3f}s; {problems or 'no mismatches'}")


# -- 2 -------------------------------------------------------------------------------

NETWORK_FLAG = "SCLEGO_NETWORK_PSD"


def _fetch_closes(ticker):
    start = int(datetime(2020, 3, 25, tzinfo=timezone.utc).timestamp())
    end = int(datetime(2025, 3, 25, tzinfo=timezone.utc).timestamp())
    url = (f"https://query1.finance.yahoo.com/v8/finance/chart/{ticker}"
           f"?period1={start}&period2={end}&interval=1d")
    req = urllib.request.Request(url, headers={"User-Agent": "Mozilla/5.0"})
    with urllib.request.urlopen(req, timeout=30) as resp:
        doc = json.load(resp)
    result = doc["chart"]["result"][0]
    days = [datetime.fromtimestamp(t, tz=timezone.utc).date() for t in result["timestamp"]]
    closes = result["indicators"]["quote"][0]["close"]
    obs = {}
    for d, c in zip(days, closes):
        if c is not None:
            obs[d] = c
    return PriceSeries(ticker, tuple(sorted(obs.items())))


@pytest.mark.skipif(not os.environ.get(NETWORK_FLAG), reason=f"networked PSD check; set {NETWORK_FLAG}=1")
def test_criterion_2_networked_psd(criterion):
    btc = psd(_fetch_closes("BTC-USD"))
    gold = psd(_fetch_closes("GC=F"))
    ok = abs(btc / 23413.08 - 1) <= 0.05 and abs(gold / 313.77 - 1) <= 0.05
    criterion(2, ok, f"BTC PSD {btc:.2f} vs 23413.08, Gold PSD {gold:.2f} vs 313.77 (tolerance 5%)")


def test_criterion_2_reported_skip():
    if not os.environ.get(NETWORK_FLAG):
        from conftest import ACCEPTANCE_LINES

        ACCEPTANCE_LINES.append(f"criterion 2: SKIP - optional networked PSD check (set {NETWORK_FLAG}=1)")


# -- 3 -------------------------------------------------------------------------------

def test_criterion_3_table7_calibration(run_cli, criterion):
    start = time.perf_counter()
    code, out, _, _ = run_cli("score", "--format", "json,md")
    elapsed = time.perf_counter() - start
    doc = json.loads((out / "report.json").read_text())
    entries = {e["symbol"]: e for e in doc["entries"]}
    up_checked = dn_checked = 0
    problems = []
    for sym, row in TABLE7.items():
        e = entries[sym]
        for key, want in zip(CATEGORY_KEYS, row[:3]):
            got = e["upstream"]["per_category"][key]
            up_checked += 1
            if abs(got - want) > 1e-4:
                problems.append(f"{sym} {key} {got} != {want}")
        for key, want in zip(HOLDER_KEYS, row[3:]):
            got = 100 * e["downstream"]["shares"][key]
            dn_checked += 1
            if abs(got - want) > 1e-4:
                problems.append(f"{sym} {key} {got} != {want}")
    lowest = min(entries.values(), key=lambda e: e["upstream"]["total"])["symbol"]
    footer_ok = "fitted offline" in doc["footer"] and "fitted offline" in (out / "report.md").read_text()
    ok = (code == 0 and up_checked == 33 and dn_checked == 55 and not problems
          and lowest == "USDS" and footer_ok and elapsed < 1.0)
    criterion(3, ok, f"{up_checked} UP and {dn_checked} DN values within 1e-4; lowest total {lowest}; "
                     f"calibration footer present={footer_ok}; {elapsed:.3f}s; {problems[:3] or 'no mismatches'}")


# -- 4 -------------------------------------------------------------------------------

def test_criterion_4_fig7_histogram(run_cli, criterion):
    start = time.perf_counter()
    code, out, _, _ = run_cli("incidents")
    elapsed = time.perf_counter() - start
    rows = list(csv.DictReader(io.StringIO((out / "incidents.csv").read_text())))
    got = sorted((float(r["percent"]) for r in rows), reverse=True)
    ok = (code == 0 and len(got) == len(FIG7_SLICES)
          and all(abs(a - b) <= 0.01 for a, b in zip(got, FIG7_SLICES)) and elapsed < 1.0)
    criterion(4, ok, f"slices {got} vs {FIG7_SLICES}; {elapsed:.3f}s")


# -- 5 / 6 -----------------------------------------------------------------------------

def _paper_report(run_cli):
    code, out, _, _ = run_cli("score", "--format", "json")
    assert code == 0
    return {e["symbol"]: e for e in json.loads((out / "report.json").read_text())["entries"]}


def test_criterion_5_archetypes(run_cli, criterion):
    entries = _paper_report(run_cli)
    got = {}
    for sym, e in entries.items():
        got.setdefault(e["archetype"]["kind"], set()).add(sym)
    criterion(5, got == ARCHETYPES, f"archetypes {dict(sorted((k, sorted(v)) for k, v in got.items()))}")


def test_criterion_6_peripheral_dominance(run_cli, criterion):
    entries = _paper_report(run_cli)
    dominant, exceptions = [], []
    for sym, e in entries.items():
        cats = e["upstream"]["per_category"]
        if cats["PeripheralFactor"] > max(cats["PriceFluctuation"], cats["SmartContractIssue"]):
            dominant.append(sym)
        else:
            exceptions.append(sym)
    ok = len(dominant) >= 10 and exceptions == ["TUSD"]
    criterion(6, ok, f"peripheral factor leads in {len(dominant)}/11; exceptions {exceptions}")


# -- 7 -------------------------------------------------------------------------------

def _martingale():
    sc = load_scenario((DATA / "scenarios" / "martingale.json").read_bytes())
    finals = np.array([simulate(sc.config, sc.controllers, sc.initial, s).final.price for s in sc.seeds])
    se = finals.std(ddof=1) / math.sqrt(finals.size)
    return finals.size, abs(finals.mean() - sc.initial.price), se


def _euler_ratio():
    sc = load_scenario((DATA / "scenarios" / "exponential-decay.json").read_bytes())
    cfg = sc.config
    errors = []
    for dt in (cfg.dt * 10, cfg.dt * 5):
        run = ScenarioConfig(horizon=cfg.horizon, dt=dt, A=cfg.A, B=0, sigma=0)
        traj = simulate(run, [], sc.initial)
        t = np.array([r[0] for r in traj.rows])
        errors.append(np.max(np.abs(traj.prices() - sc.initial.price * np.exp(cfg.A * t))))
    return errors[0] / errors[1]


controller_sets = st.lists(st.sampled_from([
    Controller(K.EMERGENCY, halt_bound=0.1, bailout_size=5.0),
    Controller(K.LIQUIDATION, liquidation_threshold=1.5),
    Controller(K.SUPPLY_ADJUSTMENT, adjustment_coefficient=0.2),
]), max_size=3, unique=True)


@st.composite
def hedged_cases(draw):
    ctrls = draw(controller_sets) + [Controller(K.HEDGING, tolerance=0.0)]
    shocks = draw(st.lists(st.builds(Shock, st.integers(0, 19).map(lambda k: k * 0.25),
                                     st.floats(-0.5, 0.5, allow_nan=False)), max_size=3))
    cfg = ScenarioConfig(horizon=5, dt=0.25, A=draw(st.floats(-1, 0)), B=draw(st.floats(0, 1)),
                         sigma=draw(st.floats(0, 0.1)), shocks=shocks, oracle_lag=draw(st.integers(0, 4)),
                         drift_reference="peg")
    init = SimState(price=draw(st.floats(0.5, 1.5)), supply=draw(st.floats(1, 1e4)),
                    collateral_value=draw(st.floats(0, 2e4)), debt=draw(st.floats(0, 1e4)),
                    bailout_reserve=draw(st.floats(0, 100)))
    return cfg, ctrls, init, draw(st.integers(0, 2**32))


INVARIANT_CASES = {"n": 0, "violations": []}


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(hedged_cases())
def _check_delta_and_halt(case):
    cfg, ctrls, init, seed = case
    traj = simulate(cfg, ctrls, init, seed)
    INVARIANT_CASES["n"] += 1
    for prev, cur in zip(traj.states, traj.states[1:]):
        if cur.halted:
            if cur.supply != prev.supply or cur.hedge_short != prev.hedge_short:
                INVARIANT_CASES["violations"].append(("halt", prev, cur))
        elif cur.collateral_value - cur.hedge_short != 0:
            # only price shocks are drawn, so collateral never moves after the hedge trades
            INVARIANT_CASES["violations"].append(("delta", prev, cur))


def test_criterion_7_simulator_properties(criterion):
    start = time.perf_counter()
    n, gap, se = _martingale()
    martingale_time = time.perf_counter() - start
    ratio = _euler_ratio()
    _check_delta_and_halt()
    sc = load_scenario((DATA / "scenarios" / "reflexive-crash.json").read_bytes())
    start = time.perf_counter()
    sa = [abs(simulate(r.config, r.controllers, r.initial, s).final.price - 1)
          for r in [sc.runs["supply-adjustment"]] for s in r.seeds]
    liq = [abs(simulate(r.config, r.controllers, r.initial, s).final.price - 1)
           for r in [sc.runs["liquidation"]] for s in r.seeds]
    spiral_time = time.perf_counter() - start
    parts = {
        "a": n >= 10_000 and gap <= 3 * se and martingale_time < 30,
        "b": 1.7 <= ratio <= 2.3,
        "c": INVARIANT_CASES["n"] >= 1000 and not INVARIANT_CASES["violations"],
        "d": (len(sa) == len(liq) == 100 and min(sa) > 0.2 and max(liq) < 0.05 and spiral_time < 10),
    }
    detail = (f"(a) {n} seeds, |mean-P0|={gap:.2e} vs 3SE={3 * se:.2e}, {martingale_time:.1f}s "
              f"[{'ok' if parts['a'] else 'FAIL'}]; "
              f"(b) error ratio {ratio:.3f} [{'ok' if parts['b'] else 'FAIL'}]; "
              f"(c) {INVARIANT_CASES['n']} cases, {len(INVARIANT_CASES['violations'])} violations "
              f"[{'ok' if parts['c'] else 'FAIL'}]; "
              f"(d) supply-adjustment min |P-1| {min(sa):.3f}, liquidation max {max(liq):.4f}, "
              f"{spiral_time:.2f}s [{'ok' if parts['d'] else 'FAIL'}]")
    criterion(7, all(parts.values()), detail)


# -- 8 -------------------------------------------------------------------------------

def algorithm_1(current_value, debt, liquidation_threshold, discount, liquidation_rate):
    """Line-by-line liquidation; returns (seized or "Safe", debt after, value after)."""
    if current_value / debt < liquidation_threshold:
        seized = current_value * (1 - discount)
        debt = debt - debt * liquidation_rate  # repay(debt * liquidation_rate)
        return seized, debt, current_value - seized
    return "Safe", debt, current_value


def algorithm_2(current_supply, current_price, target_price, adjustment_coefficient):
    """Line-by-line supply adjustment; returns the supply afterwards."""
    supply_change = current_supply * adjustment_coefficient * (current_price - target_price)
    if current_price > target_price:
        return current_supply + supply_change  # mint(supply_change)
    # burn(abs(supply_change)); a burn cannot remove more tokens than exist
    return current_supply - min(abs(supply_change), current_supply)


def test_criterion_8_algorithm_oracles(criterion):
    rnd = random.Random(20250531)
    mismatches = []
    n = 10_000
    for _ in range(n):
        value = rnd.choice([0.0, rnd.uniform(0, 1e6)])
        debt = rnd.uniform(1e-3, 1e6)
        c = Controller(K.LIQUIDATION, liquidation_threshold=rnd.uniform(1.0001, 3),
                       discount=rnd.uniform(0, 0.99), liquidation_rate=rnd.uniform(1e-3, 1))
        state, outcome = liquidation_step(SimState(collateral_value=value, debt=debt), c)
        seized, debt_after, value_after = algorithm_1(value, debt, c.liquidation_threshold, c.discount,
                                                      c.liquidation_rate)
        got = ("Safe" if outcome.safe else outcome.seized, state.debt, state.collateral_value)
        if got != (seized, debt_after, value_after):
            mismatches.append(("liq", value, debt, got))

        supply = rnd.uniform(0, 1e9)
        target = rnd.choice([1.0, rnd.uniform(0.5, 2)])
        price = rnd.choice([target, rnd.uniform(0, 2 * target)])
        k = rnd.choice([rnd.uniform(1e-4, 1), rnd.uniform(1, 10)])
        c = Controller(K.SUPPLY_ADJUSTMENT, adjustment_coefficient=k, target_price=target)
        got = supply_adjust_step(SimState(supply=supply), c, price).supply
        if got != algorithm_2(supply, price, target, k):
            mismatches.append(("supply", supply, price, target, k, got))
    _, zero_debt = liquidation_step(SimState(collateral_value=5.0, debt=0.0), Controller(K.LIQUIDATION))
    ok = not mismatches and zero_debt.safe
    criterion(8, ok, f"{n} random inputs per algorithm, {len(mismatches)} mismatches (exact equality); "
                     f"zero debt is Safe={zero_debt.safe}")


# -- 9 -------------------------------------------------------------------------------

def _roundtrips():
    failures = []
    for name in ("usd", "gold", "bitcoin"):
        raw = (DATA / "table1" / f"{name}.csv").read_bytes()
        if write_price_csv(parse_price_csv(raw)) != raw:
            failures.append(name)
    for parse, write, rel in [
        (parse_redemption_costs, write_redemption_costs, "table1/redemption.csv"),
        (parse_assessments, write_assessments, "paper-2025/assessments.csv"),
        (parse_incidents, write_incidents, "incidents.csv"),
    ]:
        x = parse((DATA / rel).read_bytes())
        if parse(write(x)) != x:
            failures.append(rel)
    juris = parse_jurisdictions((DATA / "table1" / "jurisdictions.csv").read_bytes())
    if parse_jurisdictions(write_jurisdictions(juris)) != juris:
        failures.append("jurisdictions")
    for path in sorted((DATA / "paper-2025" / "snapshots").glob("*.csv")):
        raw = path.read_bytes()
        if write_holder_snapshot(parse_holder_snapshot(raw)) != raw:
            failures.append(path.name)
    return failures


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_9_roundtrip_and_determinism(run_cli, tmp_path, criterion):
    failures = _roundtrips()
    _, out, _, _ = run_cli("score", "--format", "json,csv", out=tmp_path / "rt")
    for fmt in ("json", "csv"):
        data = (out / f"report.{fmt}").read_bytes()
        if write_report(read_report(data, fmt), fmt) != data:
            failures.append(f"report.{fmt}")
    commands = [
        ("metrics",),
        ("score",),
        ("incidents",),
        ("simulate", "reflexive-crash", "--seeds", "1-5", "--format", "json,md,csv"),
        ("simulate", "null-dynamics"),
    ]
    nondeterministic = []
    for i, cmd in enumerate(commands):
        a = _tree(run_cli(*cmd, out=tmp_path / f"a{i}")[1])
        b = _tree(run_cli(*cmd, out=tmp_path / f"b{i}")[1])
        if a != b or not a:
            nondeterministic.append(cmd[0])
    ok = not failures and not nondeterministic
    criterion(9, ok, f"round-trip failures {failures or 'none'}; "
                     f"non-identical CLI reruns {nondeterministic or 'none'} over {len(commands)} commands")
