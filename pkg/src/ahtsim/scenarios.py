"""Canned trigger scenarios on a two-buffer harness.

Test Case 1: the victim toggles every cycle, the trigger sits just below its
threshold when the supply drops at 700 ns, and the supply returns at 800 ns.
Test Case 2: same supply schedule, but the trigger input is held high.
"""

from __future__ import annotations

from .aht import AhtInstance, TriggerParams, default_params, precharge_for_cut
from .logicsim import Stimulus, Trace, run
from .netlist import Netlist
from .vddctl import VddSchedule, schedule_from_duty

__all__ = [
    "trigger_harness",
    "test_case_schedule",
    "test_case_1",
    "test_case_2",
    "OFF_START_NS",
    "OFF_END_NS",
]

OFF_START_NS = 700
OFF_END_NS = 800


def trigger_harness() -> Netlist:
    """``v = BUF(a)`` carries the victim, ``y = BUF(b)`` the payload."""
    return Netlist.build("trigger_harness", ["a", "b"], ["v", "y"], [("v", "BUF", ["a"]), ("y", "BUF", ["b"])])


def test_case_schedule(horizon_ns: int | None = None) -> VddSchedule:
    """Supply on for [0, 700) ns of every 800 ns period."""
    return schedule_from_duty(OFF_END_NS, OFF_START_NS / OFF_END_NS, 0, horizon_ns)


def _run(p: TriggerParams, stim: Stimulus, v_init: float, horizon_ns: int) -> Trace:
    n = trigger_harness()
    inst = AhtInstance(p, n.net_index["v"], n.net_index["y"])
    inst.state.v_cap = v_init
    return run(n, stim, test_case_schedule(horizon_ns), [inst], horizon_ns=horizon_ns)


def test_case_1(fortified: bool = False, horizon_ns: int = 1000, params: TriggerParams | None = None) -> Trace:
    p = params or default_params(fortified)
    n = trigger_harness()
    stim = Stimulus.alternating(n, "a", horizon_ns // 10 + 1)
    return _run(p, stim, precharge_for_cut(p, OFF_START_NS), horizon_ns)


def test_case_2(fortified: bool = False, horizon_ns: int = 5000, params: TriggerParams | None = None,
                v_init: float = 0.0) -> Trace:
    p = params or default_params(fortified)
    n = trigger_harness()
    stim = Stimulus.constant(n, horizon_ns // 10 + 1, value=1)
    return _run(p, stim, v_init, horizon_ns)
