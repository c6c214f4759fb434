"""Duty-cycled supply schedules and the counter-based power-switch controller."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .aht import DEFAULT_CLOCK_NS, TriggerParams, toggles_to_trigger

__all__ = [
    "VddSchedule",
    "ScheduleError",
    "schedule_from_duty",
    "always_on",
    "vdd_at",
    "SwitchState",
    "PmosGate",
    "ControlCircuit",
    "control_circuit_step",
    "control_waveform",
    "schedule_for_control",
    "critical_duty",
    "certification_horizon",
    "duty_voltage_curve",
    "DEFAULT_SCHED_PERIOD_NS",
]

DEFAULT_SCHED_PERIOD_NS = 1000


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class VddSchedule:
    """Periodic supply waveform: on for ``on_ns`` at the start of every period.

    ``phase_ns`` shifts the waveform right. ``horizon_ns=None`` means unbounded.
    """

    period_ns: int
    duty: float
    phase_ns: int = 0
    horizon_ns: int | None = None

    def __post_init__(self):
        if self.period_ns <= 0:
            raise ScheduleError("period_ns must be positive")
        if not 0 < self.duty <= 1:
            raise ScheduleError(f"duty must lie in (0, 1], got {self.duty}")
        if self.phase_ns < 0:
            raise ScheduleError("phase_ns must be nonnegative")
        if self.horizon_ns is not None and self.horizon_ns < 0:
            raise ScheduleError("horizon_ns must be nonnegative")

    @property
    def on_ns(self) -> int:
        return self.period_ns if self.duty >= 1 else int(round(self.duty * self.period_ns))

    @property
    def always_on(self) -> bool:
        return self.on_ns >= self.period_ns

    def _check(self, t: int):
        if t < 0 or (self.horizon_ns is not None and t > self.horizon_ns):
            raise ScheduleError(f"time {t} ns lies outside the schedule horizon")

    def at(self, t: int) -> bool:
        self._check(t)
        if self.always_on:
            return True
        return (t - self.phase_ns) % self.period_ns < self.on_ns

    def powered_between(self, a: int, b: int) -> bool:
        """True when VDD stays on over the whole half-open interval ``[a, b)``."""
        self._check(a)
        if self.always_on:
            return True
        offset = (a - self.phase_ns) % self.period_ns
        return offset + (b - a) <= self.on_ns

    def edges(self, a: int, b: int) -> list[tuple[int, bool]]:
        """Supply transitions strictly inside ``(a, b)`` as ``(time, new_state)``."""
        if self.always_on or b - a <= 1:
            return []
        out = []
        k = (a - self.phase_ns) // self.period_ns
        while True:
            start = self.phase_ns + k * self.period_ns
            if start >= b:
                break
            for t, on in ((start, True), (start + self.on_ns, False)):
                if a < t < b:
                    out.append((t, on))
            k += 1
        return out


def schedule_from_duty(
    period_ns: int = DEFAULT_SCHED_PERIOD_NS,
    duty: float = 1.0,
    phase_ns: int = 0,
    horizon_ns: int | None = None,
    clock_ns: int = DEFAULT_CLOCK_NS,
) -> VddSchedule:
    s = VddSchedule(int(period_ns), float(duty), int(phase_ns), horizon_ns)
    if not s.always_on and s.on_ns < clock_ns:
        raise ScheduleError(f"on-window of {s.on_ns} ns is shorter than one {clock_ns} ns clock")
    return s


def always_on(horizon_ns: int | None = None) -> VddSchedule:
    return VddSchedule(DEFAULT_SCHED_PERIOD_NS, 1.0, 0, horizon_ns)


def vdd_at(s: VddSchedule, t_ns: int) -> bool:
    return s.at(t_ns)


class SwitchState(str, enum.Enum):
    ON_STATE = "ON_STATE"
    OFF_STATE = "OFF_STATE"


class PmosGate(str, enum.Enum):
    CONDUCTING = "conducting"
    BLOCKED = "blocked"


@dataclass(frozen=True)
class ControlCircuit:
    """Counter plus a negative-edge state bit driving the supply switch.

    Each phase lasts ``counter_max + 1`` negative edges: the edge that finds
    the counter at its maximum flips the state bit and clears the counter.
    """

    counter_max_on: int
    counter_max_off: int
    count: int = 0
    state_bit: SwitchState = SwitchState.ON_STATE

    def __post_init__(self):
        if self.counter_max_on < 0 or self.counter_max_off < 0:
            raise ValueError("counter maxima must be nonnegative")
        if not 0 <= self.count <= self.active_max:
            raise ValueError("count outside [0, active counter_max]")

    @property
    def active_max(self) -> int:
        return self.counter_max_on if self.state_bit is SwitchState.ON_STATE else self.counter_max_off

    @property
    def pmos_gate(self) -> PmosGate:
        return PmosGate.CONDUCTING if self.state_bit is SwitchState.ON_STATE else PmosGate.BLOCKED

    @property
    def duty(self) -> float:
        return (self.counter_max_on + 1) / (self.counter_max_on + self.counter_max_off + 2)


def control_circuit_step(c: ControlCircuit, negedge: bool) -> tuple[ControlCircuit, PmosGate]:
    """Advance one clock edge. Rising edges leave the circuit untouched."""
    if not negedge:
        return c, c.pmos_gate
    if c.count >= c.active_max:
        flipped = SwitchState.OFF_STATE if c.state_bit is SwitchState.ON_STATE else SwitchState.ON_STATE
        c = replace(c, state_bit=flipped, count=0)
    else:
        c = replace(c, count=c.count + 1)
    return c, c.pmos_gate


def control_waveform(c: ControlCircuit, n_cycles: int, clock_ns: int = DEFAULT_CLOCK_NS) -> list[tuple[int, bool]]:
    """Supply state after every clock edge over *n_cycles*.

    Rising edges sit at ``k*clock_ns`` and falling edges at ``k*clock_ns + clock_ns/2``.
    Returns ``(time_ns, vdd_on)`` pairs starting with the initial state at 0.
    """
    if clock_ns % 2:
        raise ValueError("clock_ns must be even so negative edges fall on whole ns")
    half = clock_ns // 2
    out = [(0, c.pmos_gate is PmosGate.CONDUCTING)]
    for k in range(n_cycles):
        for t, neg in ((k * clock_ns + half, True), ((k + 1) * clock_ns, False)):
            c, gate = control_circuit_step(c, neg)
            out.append((t, gate is PmosGate.CONDUCTING))
    return out


def schedule_for_control(
    c: ControlCircuit, clock_ns: int = DEFAULT_CLOCK_NS, horizon_ns: int | None = None
) -> VddSchedule:
    """The periodic schedule a freshly reset controller produces."""
    period = (c.counter_max_on + c.counter_max_off + 2) * clock_ns
    on_ns = (c.counter_max_on + 1) * clock_ns
    return VddSchedule(period, on_ns / period, period - clock_ns // 2, horizon_ns)


def _victim_harness(toggle_period_ns: int):
    # One buffer per role: ``v`` carries the toggling victim, ``y`` the payload.
    from .logicsim import Stimulus
    from .netlist import Netlist

    n = Netlist.build("victim_harness", ["a", "b"], ["v", "y"], [("v", "BUF", ["a"]), ("y", "BUF", ["b"])])
    return n, lambda cycles: Stimulus.alternating(n, "a", cycles, toggle_period_ns)


def _fires(p: TriggerParams, duty: float, toggle_period_ns: int, sched_period_ns: int, horizon_ns: int,
           phase_ns: int = 0) -> tuple[bool, float]:
    from .aht import AhtInstance
    from .logicsim import run

    n, stim = _victim_harness(toggle_period_ns)
    inst = AhtInstance(p, n.net_index["v"], n.net_index["y"])
    sched = schedule_from_duty(sched_period_ns, duty, phase_ns, horizon_ns, clock_ns=toggle_period_ns)
    tr = run(n, stim(horizon_ns // toggle_period_ns + 1), sched, [inst], horizon_ns=horizon_ns, record=())
    return bool(tr.trigger_events), float(tr.v_cap[inst.name].max(initial=0.0))


def certification_horizon(p: TriggerParams, toggle_period_ns: int = DEFAULT_CLOCK_NS, factor: int = 10) -> int | None:
    k = toggles_to_trigger(p)
    return None if k is None else factor * k * toggle_period_ns


def critical_duty(
    p: TriggerParams,
    victim_toggle_period_ns: int = DEFAULT_CLOCK_NS,
    sched_period_ns: int = DEFAULT_SCHED_PERIOD_NS,
    tolerance: float = 0.01,
    horizon_ns: int | None = None,
) -> float:
    """Largest duty (to *tolerance*) at which the trigger never fires.

    Bisection over full simulations of a victim toggling every
    *victim_toggle_period_ns* while powered. The horizon defaults to ten times
    the full-duty trigger time.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    bound = certification_horizon(p, victim_toggle_period_ns)
    if bound is None:
        return 1.0
    if horizon_ns is None:
        horizon_ns = bound
    elif horizon_ns < bound:
        raise ScheduleError(f"horizon {horizon_ns} ns is below the certification bound {bound} ns")
    if not _fires(p, 1.0, victim_toggle_period_ns, sched_period_ns, horizon_ns)[0]:
        return 1.0
    lo = victim_toggle_period_ns / sched_period_ns
    if _fires(p, lo, victim_toggle_period_ns, sched_period_ns, horizon_ns)[0]:
        return 0.0
    hi = 1.0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if _fires(p, mid, victim_toggle_period_ns, sched_period_ns, horizon_ns)[0]:
            hi = mid
        else:
            lo = mid
    return lo


def duty_voltage_curve(
    p: TriggerParams,
    duties,
    victim_toggle_period_ns: int = DEFAULT_CLOCK_NS,
    sched_period_ns: int = DEFAULT_SCHED_PERIOD_NS,
    horizon_ns: int | None = None,
) -> list[tuple[float, float, bool]]:
    """``(duty, max capacitor voltage, fired)`` for each duty, for plotting."""
    horizon_ns = horizon_ns or certification_horizon(p, victim_toggle_period_ns) or 10 * sched_period_ns
    rows = []
    for d in duties:
        fired, vmax = _fires(p, float(d), victim_toggle_period_ns, sched_period_ns, horizon_ns)
        rows.append((float(d), vmax, fired))
    return rows
