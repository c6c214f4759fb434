"""Re-derive the frozen trigger defaults from the 770 ns / 30 us targets.

Only the oracle charge model is used for the derivation; the library values
are then checked against it.
"""

import math
from types import SimpleNamespace

import pytest

from ahtsim.aht import default_params, retention_check, steady_firing_voltage, toggles_to_trigger
from ahtsim.vddctl import critical_duty

from oracles import brute_toggles, critical_on_ns, harness_fire_time

TARGET_FIRE_NS = 770
TARGET_RETENTION_NS = 30_000.0


def _steady_voltage(c_main, tau, steps=3000):
    a, keep, v = 1 / (1 + c_main), math.exp(-10 / tau), 0.0
    for _ in range(steps):
        v = v * keep
        v += a * (1 - v)
    return v


def _derive_tau(c_main):
    tau = 1e5
    for _ in range(30):
        tau = TARGET_RETENTION_NS / math.log(_steady_voltage(c_main, tau) / 0.8)
    return tau


def _fire_time(c_main):
    p = SimpleNamespace(c_unit=1.0, c_main=c_main, c_new=0.0, vdd_volts=1.0, v_threshold=0.8,
                        leak_tau_ns=_derive_tau(c_main))
    return harness_fire_time(p, 1000, 1000, 2000)


def _edge(lo, hi, inside_is_lo):
    """Bisect the boundary of the 770 ns window between *lo* and *hi*."""
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if (_fire_time(mid) == TARGET_FIRE_NS) == inside_is_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


@pytest.fixture(scope="module")
def window():
    low = _edge(46.0, 46.912, inside_is_lo=False)[1]
    high = _edge(46.912, 48.0, inside_is_lo=True)[0]
    return low, high


def _pure_count_window():
    # 77 toggles exactly: (1 - a)^76 > 0.2 >= (1 - a)^77 with a = 1 / (1 + c_main)
    r = math.log(0.2)
    lo_a, hi_a = 1 - math.exp(r / 76), 1 - math.exp(r / 77)
    return (1 - lo_a) / lo_a, (1 - hi_a) / hi_a


def test_c_main_inside_both_windows(window):
    low, high = window
    p_low, p_high = _pure_count_window()
    assert brute_toggles(1.0, p_low + 1e-6, 0.0, 1.0, 0.8) == 77 == brute_toggles(1.0, p_high - 1e-6, 0.0, 1.0, 0.8)
    assert brute_toggles(1.0, p_high + 1e-6, 0.0, 1.0, 0.8) == 78
    assert 46.4 < low < p_low < high < p_high
    lo, hi = p_low, high
    c = default_params().c_main
    assert lo < c < hi
    # near the middle of the intersection, away from both edges
    assert abs(c - 0.5 * (lo + hi)) < 0.01


def test_pure_count_alone_fires_late():
    # the largest leak-free choices reach 77 toggles but miss 770 ns once leakage is on
    c = 47.3
    assert brute_toggles(1.0, c, 0.0, 1.0, 0.8) == 77
    assert _fire_time(c) == TARGET_FIRE_NS + 10


def test_leak_tau_matches_derivation():
    p = default_params()
    assert p.leak_tau_ns == pytest.approx(_derive_tau(p.c_main), abs=0.25)
    assert retention_check(p, steady_firing_voltage(p)) == pytest.approx(TARGET_RETENTION_NS, abs=0.1)
    assert steady_firing_voltage(p) == pytest.approx(_steady_voltage(p.c_main, p.leak_tau_ns), abs=1e-12)


def test_library_counts_agree():
    p = default_params()
    assert toggles_to_trigger(p) == 77 == brute_toggles(1.0, p.c_main, 0.0, 1.0, 0.8)
    assert harness_fire_time(p, 1000, 1000, 2000) == TARGET_FIRE_NS


def test_fortified_c_new_places_critical_duty():
    p = default_params(fortified=True)
    assert p.c_new == 29.0
    ref = critical_on_ns(p, 1000, 12_300) / 1000
    assert 0.70 < ref < 0.75
    assert critical_duty(p) == pytest.approx(ref, abs=0.011)
