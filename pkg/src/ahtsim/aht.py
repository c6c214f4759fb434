"""Behavioral charge-accumulation trigger models.

A victim wire toggle dumps a unit capacitor charged to VDD onto the main
capacitor (charge sharing). The fortified variant adds a parallel capacitor
that slows every step and bleeds the main capacitor whenever VDD drops.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .logic import LogicValue

__all__ = [
    "PayloadKind",
    "TriggerParams",
    "TriggerState",
    "AhtInstance",
    "TriggerEvent",
    "charge_share_delta",
    "accumulate",
    "toggles_to_trigger",
    "leakage_decay",
    "off_redistribute",
    "retention_check",
    "steady_firing_voltage",
    "trigger_step",
    "default_params",
    "precharge_for_cut",
    "InstrumentedNetlist",
    "UnknownNetError",
    "attach",
    "inject_aht",
    "DEFAULT_CLOCK_NS",
]

DEFAULT_CLOCK_NS = 10

# Frozen default calibration; the derivation is reproduced by
# tests/test_calibration_constants.py.
_DEFAULT_C_MAIN = 46.912
_DEFAULT_LEAK_TAU_NS = 136_541.25
_FORTIFIED_C_NEW = 29.0


class PayloadKind(str, enum.Enum):
    XOR_FLIP = "XOR_FLIP"
    FORCE_ONE = "FORCE_ONE"
    FORCE_ZERO = "FORCE_ZERO"


@dataclass(frozen=True)
class TriggerParams:
    c_unit: float
    c_main: float
    c_new: float = 0.0
    vdd_volts: float = 1.0
    v_threshold: float = 0.8
    retention_ns: float = 30_000.0
    leak_tau_ns: float = _DEFAULT_LEAK_TAU_NS
    detector_gated_by_vdd: bool = True

    def __post_init__(self):
        if not (self.c_unit > 0 and self.c_main > 0):
            raise ValueError("c_unit and c_main must be positive")
        if not self.c_new >= 0:
            raise ValueError("c_new must be nonnegative")
        if not self.vdd_volts > 0:
            raise ValueError("vdd_volts must be positive")
        if not 0 < self.v_threshold < self.vdd_volts:
            raise ValueError("v_threshold must lie strictly between 0 and vdd_volts")
        if not (self.retention_ns > 0 and self.leak_tau_ns > 0):
            raise ValueError("retention_ns and leak_tau_ns must be positive")

    @property
    def alpha(self) -> float:
        """Fraction of the remaining headroom gained per toggle."""
        return self.c_unit / (self.c_unit + self.c_main + self.c_new)

    @property
    def fortified(self) -> bool:
        return self.c_new > 0


@dataclass
class TriggerState:
    v_cap: float = 0.0
    last_victim_value: LogicValue = LogicValue.X
    fired: bool = False
    last_update_ns: int = 0
    last_vdd_on: bool = True


@dataclass(frozen=True)
class TriggerEvent:
    time_ns: int
    aht: str


@dataclass
class AhtInstance:
    """One trigger attached to a victim net and a payload net (net ids)."""

    params: TriggerParams
    victim_net: int
    payload_net: int
    payload_kind: PayloadKind = PayloadKind.XOR_FLIP
    name: str = "aht0"
    state: TriggerState = field(default_factory=TriggerState)

    def __post_init__(self):
        if self.victim_net == self.payload_net:
            raise ValueError("victim and payload must be different nets")
        self.payload_kind = PayloadKind(self.payload_kind)

    def fresh(self, v_init: float | None = None) -> "AhtInstance":
        """Copy with an independent state (optionally a new starting voltage)."""
        state = replace(self.state)
        if v_init is not None:
            state.v_cap = float(v_init)
        return replace(self, state=state)

    def step(self, victim_now: LogicValue, vdd_on: bool, now_ns: int) -> TriggerEvent | None:
        """Advance to *now_ns*; return an event on the fired rising edge."""
        p, s = self.params, self.state
        if now_ns < s.last_update_ns:
            raise ValueError(f"time went backwards: {now_ns} < {s.last_update_ns}")
        v = leakage_decay(p, s.v_cap, now_ns - s.last_update_ns)
        if s.last_vdd_on and not vdd_on and p.c_new > 0:
            v = off_redistribute(p, v)
        toggled = (
            victim_now is not LogicValue.X
            and s.last_victim_value is not LogicValue.X
            and victim_now is not s.last_victim_value
        )
        if toggled and vdd_on:
            v += charge_share_delta(p, v)
        s.v_cap = min(max(v, 0.0), p.vdd_volts)
        s.last_victim_value = victim_now
        s.last_vdd_on = vdd_on
        s.last_update_ns = now_ns
        fired = s.v_cap >= p.v_threshold and (vdd_on or not p.detector_gated_by_vdd)
        event = TriggerEvent(now_ns, self.name) if fired and not s.fired else None
        s.fired = fired
        return event


def charge_share_delta(p: TriggerParams, v0: float) -> float:
    """Voltage gained on the main capacitor by one charge-sharing event."""
    return p.c_unit * (p.vdd_volts - v0) / (p.c_unit + p.c_main + p.c_new)


def accumulate(p: TriggerParams, k: int, v_init: float = 0.0) -> float:
    """Voltage after *k* toggles from *v_init*, closed form."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return p.vdd_volts - (p.vdd_volts - v_init) * (1.0 - p.alpha) ** k


def toggles_to_trigger(p: TriggerParams, v_init: float = 0.0) -> int | None:
    """Smallest toggle count reaching the threshold; ``None`` if unreachable."""
    if v_init >= p.v_threshold:
        return 0
    head = p.vdd_volts - v_init
    need = p.vdd_volts - p.v_threshold
    if need <= 0:
        return None
    a = p.alpha
    k = max(1, math.ceil(math.log(need / head) / math.log1p(-a)))
    # Correct for rounding in the logarithm estimate.
    while k > 1 and accumulate(p, k - 1, v_init) >= p.v_threshold:
        k -= 1
    while accumulate(p, k, v_init) < p.v_threshold:
        k += 1
    return k


def leakage_decay(p: TriggerParams, v: float, dt: float) -> float:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return v
    return v * math.exp(-dt / p.leak_tau_ns)


def off_redistribute(p: TriggerParams, v: float) -> float:
    """Share the main capacitor's charge with the parallel capacitor."""
    return v * p.c_main / (p.c_main + p.c_new)


def retention_check(p: TriggerParams, v_fire: float) -> float:
    """Time for leakage to pull *v_fire* down to the threshold, in ns."""
    if v_fire < p.v_threshold:
        raise ValueError("v_fire is below the threshold")
    return p.leak_tau_ns * math.log(v_fire / p.v_threshold)


def steady_firing_voltage(p: TriggerParams, toggle_period_ns: float = DEFAULT_CLOCK_NS) -> float:
    """Fixed point of "leak for one period, then toggle" under constant VDD."""
    keep = math.exp(-toggle_period_ns / p.leak_tau_ns)
    return p.alpha * p.vdd_volts / (1.0 - keep * (1.0 - p.alpha))


def trigger_step(inst: AhtInstance, victim_now: LogicValue, vdd_on: bool, now_ns: int):
    """Functional form of :meth:`AhtInstance.step`; returns ``(inst, event)``."""
    event = inst.step(victim_now, vdd_on, now_ns)
    return inst, event


def default_params(fortified: bool = False, **overrides) -> TriggerParams:
    """Calibrated defaults: 77 toggles (770 ns at 10 ns) to fire, 30 us retention.

    The fortified variant adds a parallel capacitor that puts its critical
    duty cycle (1000 ns schedule period) between 0.70 and 0.75.
    """
    base = dict(c_unit=1.0, c_main=_DEFAULT_C_MAIN, c_new=_FORTIFIED_C_NEW if fortified else 0.0)
    base.update(overrides)
    return TriggerParams(**base)


def precharge_for_cut(
    p: TriggerParams,
    cut_ns: int,
    toggle_period_ns: int = DEFAULT_CLOCK_NS,
    tol: float = 1e-12,
) -> float:
    """Starting voltage that leaves the trigger half a toggle short at *cut_ns*.

    Assumes the victim toggles every period from ``toggle_period_ns`` up to the
    last boundary before *cut_ns*. Used to set up "accumulated to just below
    threshold" scenarios.
    """
    toggles = (cut_ns - 1) // toggle_period_ns
    th, a, vdd = p.v_threshold, p.alpha, p.vdd_volts
    lower = (th - a * vdd) / (1 - a)  # one toggle from here lands exactly on th
    target = 0.5 * (lower + th)

    def at_cut(v0: float) -> float:
        v = v0
        for _ in range(toggles):
            v = leakage_decay(p, v, toggle_period_ns)
            v += charge_share_delta(p, v)
        return leakage_decay(p, v, cut_ns - toggles * toggle_period_ns)

    if at_cut(0.0) >= target:
        raise ValueError("the trigger already passes the target without precharge")
    lo, hi = 0.0, vdd
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if at_cut(mid) < target:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class InstrumentedNetlist:
    """A netlist with one or more triggers attached. The netlist is unchanged."""

    netlist: "Netlist"
    ahts: tuple[AhtInstance, ...]

    def __post_init__(self):
        names = [a.name for a in self.ahts]
        if len(set(names)) != len(names):
            raise ValueError("attached AHTs need distinct names")


def attach(
    n: "Netlist",
    victim: str,
    payload: str,
    params: TriggerParams | None = None,
    payload_kind: PayloadKind | str = PayloadKind.XOR_FLIP,
    name: str = "aht0",
    v_init: float = 0.0,
) -> AhtInstance:
    """Build an :class:`AhtInstance` from net names."""
    for net in (victim, payload):
        if net not in n.net_index:
            raise UnknownNetError(net)
    inst = AhtInstance(params or default_params(), n.net_index[victim], n.net_index[payload],
                       PayloadKind(payload_kind), name)
    inst.state.v_cap = float(v_init)
    return inst


class UnknownNetError(KeyError):
    def __init__(self, net: str):
        super().__init__(net)
        self.net = net

    def __str__(self):
        return f"unknown net {self.net!r}"


def inject_aht(n, inst: AhtInstance) -> InstrumentedNetlist:
    """Attach *inst* to *n* (or to an already instrumented netlist)."""
    from .netlist import SEL_NET, Zone

    base, existing = (n.netlist, n.ahts) if isinstance(n, InstrumentedNetlist) else (n, ())
    for net in (inst.victim_net, inst.payload_net):
        if not 0 <= net < len(base.net_names):
            raise UnknownNetError(str(net))
    victim = base.net_names[inst.victim_net]
    payload = base.net_names[inst.payload_net]
    g = base.gate_driving(victim)
    if g is None or g.zone is not Zone.DISRUPTIVE:
        raise ValueError(f"victim {victim!r} is not driven by a disruptive-zone gate")
    if payload in base.inputs:
        raise ValueError(f"payload {payload!r} is a primary input")
    if payload == SEL_NET:
        raise ValueError("the select signal cannot carry a payload")
    return InstrumentedNetlist(base, tuple(existing) + (inst,))
