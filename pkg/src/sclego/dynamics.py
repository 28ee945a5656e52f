"""Peg dynamics: stabilisation controllers and the two integrators.

The price follows an Euler-Maruyama discretisation of

    dP = (A (P - ref) + sum_j B_j U_j) dt + sigma(P) dW + shocks

where ``ref`` is 0 (the plain linear drift), the peg, or the redeemable backing
per token (``min(peg, collateral / supply)``), selected by
``ScenarioConfig.drift_reference``. ``U_j`` is the price pressure of controller
``j``: supply adjustment contributes the relative supply contraction per unit
time, every other controller contributes 0 and acts on the state only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InputError, SimulationError
from .rng import standard_normals


@dataclass(frozen=True)
class SimState:
    t: float = 0.0
    price: float = 1.0
    supply: float = 0.0
    collateral_value: float = 0.0
    debt: float = 0.0
    hedge_short: float = 0.0
    halted: bool = False
    bailout_reserve: float = 0.0

    def __post_init__(self):
        if self.price < 0 or self.supply < 0 or self.bailout_reserve < 0:
            raise InputError(f"price, supply and bailout_reserve must be >= 0: {self}")


class ControllerKind(str, Enum):
    LIQUIDATION = "Liquidation"
    SUPPLY_ADJUSTMENT = "SupplyAdjustment"
    HEDGING = "Hedging"
    EMERGENCY = "Emergency"
    NULL = "Null"


@dataclass(frozen=True)
class Controller:
    """One stabilisation mechanism; only the fields of its ``kind`` matter.

    ``redeem_at_par`` makes supply adjustment settle against collateral: a burn
    pays ``target_price`` per token out of collateral (and cannot exceed what
    the collateral covers), a mint deposits the same amount.
    """

    kind: ControllerKind
    liquidation_threshold: float = 1.5
    discount: float = 0.1
    liquidation_rate: float = 0.5
    adjustment_coefficient: float = 0.1
    target_price: float = 1.0
    redeem_at_par: bool = False
    tolerance: float = 0.0
    halt_bound: float = 0.2
    bailout_size: float = 0.0

    def __post_init__(self):
        kind = ControllerKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ControllerKind.LIQUIDATION:
            if not self.liquidation_threshold > 1:
                raise ConfigError("liquidation_threshold must exceed 1")
            if not 0 <= self.discount < 1:
                raise ConfigError("discount must lie in [0, 1)")
            if not 0 < self.liquidation_rate <= 1:
                raise ConfigError("liquidation_rate must lie in (0, 1]")
        elif kind is ControllerKind.SUPPLY_ADJUSTMENT:
            if not self.adjustment_coefficient > 0:
                raise ConfigError("adjustment_coefficient must be positive")
        elif kind is ControllerKind.HEDGING:
            if not self.tolerance >= 0:
                raise ConfigError("tolerance must be >= 0")
        elif kind is ControllerKind.EMERGENCY:
            if not (self.halt_bound >= 0 and self.bailout_size >= 0):
                raise ConfigError("halt_bound and bailout_size must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "Controller":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown controller fields {sorted(extra)}")
        if "kind" not in data:
            raise ConfigError("controller needs a kind")
        try:
            return cls(**data)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _require(c: Controller, kind: ControllerKind) -> None:
    if c.kind is not kind:
        raise ConfigError(f"expected a {kind.value} controller, got {c.kind.value}")


@dataclass(frozen=True)
class LiquidationOutcome:
    """``seized is None`` means the position was safe."""

    seized: float | None = None
    repaid: float = 0.0

    @property
    def safe(self) -> bool:
        return self.seized is None


def liquidation_step(state: SimState, c: Controller) -> tuple[SimState, LiquidationOutcome]:
    _require(c, ControllerKind.LIQUIDATION)
    if state.debt == 0:
        return state, LiquidationOutcome()
    if state.collateral_value / state.debt < c.liquidation_threshold:
        seized = state.collateral_value * (1 - c.discount)
        repaid = state.debt * c.liquidation_rate
        new = replace(state, collateral_value=state.collateral_value - seized, debt=state.debt - repaid)
        return new, LiquidationOutcome(seized, repaid)
    return state, LiquidationOutcome()


def supply_adjust_step(state: SimState, c: Controller, observed_price: float) -> SimState:
    """Mint above target, burn below; burns never exceed the available supply."""
    _require(c, ControllerKind.SUPPLY_ADJUSTMENT)
    if state.halted:
        return state
    change = state.supply * c.adjustment_coefficient * (observed_price - c.target_price)
    if observed_price > c.target_price:
        collateral = state.collateral_value + change * c.target_price if c.redeem_at_par else state.collateral_value
        return replace(state, supply=state.supply + change, collateral_value=collateral)
    burn = min(abs(change), state.supply)
    if c.redeem_at_par:
        burn = min(burn, max(state.collateral_value, 0.0) / c.target_price)
        return replace(state, supply=state.supply - burn,
                       collateral_value=state.collateral_value - burn * c.target_price)
    return replace(state, supply=state.supply - burn)


def implied_price_qtm(M: float, V: float, Q: float) -> float:
    """Price level from the quantity equation M V = P Q."""
    if not Q > 0:
        raise InputError(f"real output Q must be positive, got {Q}")
    return M * V / Q


def hedge_step(state: SimState, c: Controller, spot_exposure: float) -> SimState:
    _require(c, ControllerKind.HEDGING)
    if state.halted:
        return state
    if abs(spot_exposure - state.hedge_short) > c.tolerance:
        return replace(state, hedge_short=spot_exposure)
    return state


def emergency_step(state: SimState, c: Controller, peg: float = 1.0) -> SimState:
    """Suspend while the price is outside the bound, drawing on the bailout reserve."""
    _require(c, ControllerKind.EMERGENCY)
    halted = abs(state.price - peg) > c.halt_bound
    state = replace(state, halted=halted)
    if halted and state.bailout_reserve > 0:
        amount = min(c.bailout_size, state.bailout_reserve)
        state = replace(state, collateral_value=state.collateral_value + amount,
                        bailout_reserve=state.bailout_reserve - amount)
    return state


class SigmaKind(str, Enum):
    CONSTANT = "constant"
    PROPORTIONAL = "proportional"


class DriftReference(str, Enum):
    ORIGIN = "origin"
    PEG = "peg"
    BACKING = "backing"


class ShockTarget(str, Enum):
    PRICE = "price"
    COLLATERAL = "collateral"


@dataclass(frozen=True)
class Shock:
    """A price shock adds ``size`` to the price; a collateral shock scales
    collateral by ``1 + size``."""

    time: float
    size: float
    target: ShockTarget = ShockTarget.PRICE

    def __post_init__(self):
        object.__setattr__(self, "target", ShockTarget(self.target))
        if self.target is ShockTarget.COLLATERAL and self.size < -1:
            raise ConfigError("collateral shock cannot remove more than 100%")


@dataclass(frozen=True)
class ScenarioConfig:
    horizon: float
    dt: float
    A: float = 0.0
    B: tuple[float, ...] | float = 1.0
    sigma: float = 0.0
    sigma_kind: SigmaKind = SigmaKind.CONSTANT
    shocks: tuple[Shock, ...] = ()
    oracle_lag: int = 0
    seed: int = 0
    alpha: float = 0.0
    beta: float = 0.0
    peg_target: float = 1.0
    drift_reference: DriftReference = DriftReference.ORIGIN

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ConfigError("horizon must be at least one step")
        if self.oracle_lag < 0 or int(self.oracle_lag) != self.oracle_lag:
            raise ConfigError("oracle_lag must be a nonnegative integer")
        if not self.sigma >= 0:
            raise ConfigError("sigma must be >= 0")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"dt={self.dt} does not divide horizon={self.horizon}")
        object.__setattr__(self, "sigma_kind", SigmaKind(self.sigma_kind))
        object.__setattr__(self, "drift_reference", DriftReference(self.drift_reference))
        object.__setattr__(self, "shocks", tuple(s if isinstance(s, Shock) else Shock(**s) for s in self.shocks))
        if not isinstance(self.B, (int, float)):
            object.__setattr__(self, "B", tuple(float(b) for b in self.B))

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def gains(self, n: int) -> list[float]:
        if isinstance(self.B, (int, float)):
            return [float(self.B)] * n
        if len(self.B) != n:
            raise ConfigError(f"B has {len(self.B)} gains for {n} controllers")
        return list(self.B)

    def sigma_of(self, price: float) -> float:
        return self.sigma * price if self.sigma_kind is SigmaKind.PROPORTIONAL else self.sigma


TRAJECTORY_COLUMNS = ("t", "P", "supply", "collateral", "debt", "halted")


@dataclass
class Trajectory:
    rows: list[tuple[float, float, float, float, float, bool]] = field(default_factory=list)
    states: list[SimState] = field(default_factory=list)
    minted: list[float] = field(default_factory=list)
    burned: list[float] = field(default_factory=list)

    def append(self, s: SimState) -> None:
        self.states.append(s)
        self.rows.append((s.t, s.price, s.supply, s.collateral_value, s.debt, s.halted))

    @property
    def final(self) -> SimState:
        return self.states[-1]

    def prices(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for t, p, s, c, d, h in self.rows:
            w.writerow([repr(float(t)), repr(float(p)), repr(float(s)), repr(float(c)), repr(float(d)), int(h)])
        return buf.getvalue().encode()


def _reference(config: ScenarioConfig, s: SimState) -> float:
    if config.drift_reference is DriftReference.ORIGIN:
        return 0.0
    if config.drift_reference is DriftReference.PEG:
        return config.peg_target
    if s.supply <= 0:
        return config.peg_target
    return config.peg_target * min(1.0, max(s.collateral_value, 0.0) / (s.supply * config.peg_target))


def _check_finite(s: SimState, step: int) -> None:
    for name in ("price", "supply", "collateral_value", "debt", "hedge_short", "bailout_reserve"):
        if not math.isfinite(getattr(s, name)):
            raise SimulationError(f"non-finite {name}", step)


def simulate(config: ScenarioConfig, controllers: Sequence[Controller], initial: SimState,
             seed: int | None = None) -> Trajectory:
    """Run one trajectory; identical inputs give bitwise-identical output.

    Per step, emergency controllers decide the halt first so it covers the whole
    step; the remaining controllers then act in the order given (supply adjustment
    reads the lagged oracle price, hedging the current collateral value), and the
    price takes one Euler-Maruyama step.
    """
    seed = config.seed if seed is None else seed
    n = config.steps
    gains = config.gains(len(controllers))
    z = standard_normals(seed, n).tolist()
    sqdt = math.sqrt(config.dt)
    shock_at: dict[int, list[Shock]] = {}
    for shock in config.shocks:
        shock_at.setdefault(int(math.floor(shock.time / config.dt + 1e-9)), []).append(shock)

    traj = Trajectory()
    state = replace(initial, t=0.0)
    traj.append(state)
    history = [state.price]
    for k in range(n):
        observed = history[max(0, k - config.oracle_lag)]
        pressure = 0.0
        minted = burned = 0.0
        for c in controllers:
            if c.kind is ControllerKind.EMERGENCY:
                state = emergency_step(state, c, config.peg_target)
        for c, gain in zip(controllers, gains):
            if c.kind is ControllerKind.LIQUIDATION:
                state, _ = liquidation_step(state, c)
            elif c.kind is ControllerKind.SUPPLY_ADJUSTMENT:
                before = state.supply
                state = supply_adjust_step(state, c, observed)
                delta = state.supply - before
                if delta > 0:
                    minted += delta
                else:
                    burned -= delta
                if before > 0:
                    pressure += gain * (-delta / before) / config.dt
            elif c.kind is ControllerKind.HEDGING:
                state = hedge_step(state, c, state.collateral_value)
        drift = config.A * (state.price - _reference(config, state)) + pressure
        price = state.price + drift * config.dt + config.sigma_of(state.price) * sqdt * z[k]
        collateral = state.collateral_value
        for shock in shock_at.get(k, ()):
            if shock.target is ShockTarget.PRICE:
                price += shock.size
            else:
                collateral *= 1 + shock.size
        if not math.isfinite(price):
            raise SimulationError("non-finite price", k)
        state = replace(state, t=(k + 1) * config.dt, price=max(price, 0.0), collateral_value=collateral)
        _check_finite(state, k)
        traj.append(state)
        traj.minted.append(minted)
        traj.burned.append(burned)
        history.append(state.price)
    return traj


class InternalDynamics(str, Enum):
    NONE = "none"
    LINEAR = "linear"
    LOGISTIC = "logistic"


Signal = Callable[[float], object] | float | Sequence[tuple[float, object]]


def _as_function(signal: Signal) -> Callable[[float], object]:
    """Constants, callables, or step functions given as ``(start_time, value)`` pairs."""
    if callable(signal):
        return signal
    if isinstance(signal, (int, float, np.ndarray)):
        return lambda t: signal
    breaks = sorted(signal, key=lambda p: p[0])
    times = [b[0] for b in breaks]

    def step(t: float):
        i = int(np.searchsorted(times, t, side="right")) - 1
        return breaks[max(i, 0)][1]

    return step


def integrate_system_dynamics(S0: float, up_signal: Signal, dn_signal: Signal,
                              alpha: float, beta, f_spec: dict | str | None,
                              horizon: float, dt: float) -> list[tuple[float, float]]:
    """Forward-Euler integration of dS/dt = alpha UP + beta . DN + f(S).

    ``beta`` may be a scalar or a vector matching DN (dot product).
    ``f_spec`` is ``None``/``"none"``, ``{"kind": "linear", "rate": lam}`` or
    ``{"kind": "logistic", "rate": r, "capacity": K}``.
    """
    if not dt > 0 or horizon < 0:
        raise ConfigError("need dt > 0 and horizon >= 0")
    spec = {"kind": "none"} if f_spec in (None, "none") else dict(f_spec)
    kind = InternalDynamics(spec.get("kind", "none"))
    if kind is InternalDynamics.NONE:
        f = lambda s: 0.0
    elif kind is InternalDynamics.LINEAR:
        lam = float(spec["rate"])
        f = lambda s: lam * s
    else:
        r, cap = float(spec["rate"]), float(spec["capacity"])
        if not cap > 0:
            raise ConfigError("logistic capacity must be positive")
        f = lambda s: r * s * (1 - s / cap)
    up, dn = _as_function(up_signal), _as_function(dn_signal)
    n = int(round(horizon / dt))
    S = float(S0)
    out = [(0.0, S)]
    for k in range(n):
        t = k * dt
        feedback = float(np.dot(beta, dn(t)))
        S = S + dt * (alpha * float(up(t)) + feedback + f(S))
        out.append(((k + 1) * dt, S))
    return out
