import pytest
from hypothesis import given
from hypothesis import strategies as st

from ahtsim.aht import default_params
from ahtsim.vddctl import (
    ControlCircuit,
    PmosGate,
    ScheduleError,
    SwitchState,
    VddSchedule,
    always_on,
    certification_horizon,
    control_circuit_step,
    control_waveform,
    critical_duty,
    duty_voltage_curve,
    schedule_for_control,
    schedule_from_duty,
    vdd_at,
)

from oracles import critical_on_ns, edges_inside, on_at, powered_cycle, ref_control

schedules = st.builds(
    lambda period, frac, phase: VddSchedule(period, frac, phase % period),
    st.integers(20, 400), st.floats(0.05, 1.0), st.integers(0, 1000),
)


def test_schedule_validation():
    for bad in [dict(period_ns=0, duty=0.5), dict(period_ns=10, duty=0), dict(period_ns=10, duty=1.5),
                dict(period_ns=10, duty=0.5, phase_ns=-1)]:
        with pytest.raises(ScheduleError):
            VddSchedule(**bad)
    with pytest.raises(ScheduleError):
        schedule_from_duty(1000, 0.005)


def test_test_case_window():
    s = schedule_from_duty(800, 0.875, horizon_ns=1000)
    assert s.at(699) and not s.at(700) and not s.at(799) and s.at(800)
    assert s.edges(690, 810) == [(700, False), (800, True)]
    with pytest.raises(ScheduleError):
        s.at(1001)
    assert vdd_at(s, 0)


def test_always_on():
    s = always_on()
    assert s.always_on and s.at(12345) and s.edges(0, 10**6) == [] and s.powered_between(3, 10**6)


@given(schedules, st.integers(0, 3000))
def test_at_matches_oracle(s, t):
    assert s.at(t) == on_at(s.period_ns, s.on_ns, s.phase_ns, t)


@given(schedules, st.integers(0, 2000), st.integers(1, 50))
def test_powered_between_matches_oracle(s, t, T):
    assert s.powered_between(t, t + T) == powered_cycle(s.period_ns, s.on_ns, s.phase_ns, t, T)


@given(schedules, st.integers(0, 1500), st.integers(0, 600))
def test_edges_match_oracle(s, a, span):
    assert s.edges(a, a + span) == edges_inside(s.period_ns, s.on_ns, s.phase_ns, a, a + span)


@given(schedules)
def test_on_fraction(s):
    on = sum(s.at(t) for t in range(s.phase_ns, s.phase_ns + s.period_ns))
    assert on == s.on_ns


def test_control_circuit_validation():
    with pytest.raises(ValueError):
        ControlCircuit(-1, 0)
    with pytest.raises(ValueError):
        ControlCircuit(2, 2, count=3)


def test_control_step_ignores_rising_edges():
    c = ControlCircuit(2, 1)
    c2, gate = control_circuit_step(c, negedge=False)
    assert c2 == c and gate is PmosGate.CONDUCTING


def test_control_sequence_example():
    c = ControlCircuit(1, 0)
    states = []
    for _ in range(6):
        c, gate = control_circuit_step(c, True)
        states.append(gate is PmosGate.CONDUCTING)
    assert states == [True, False, True, True, False, True]
    assert ControlCircuit(1, 0).duty == pytest.approx(2 / 3)


@given(st.integers(0, 6), st.integers(0, 6), st.integers(1, 60))
def test_control_matches_reference_counter(m_on, m_off, k):
    c = ControlCircuit(m_on, m_off)
    got = []
    for _ in range(k):
        c, gate = control_circuit_step(c, True)
        got.append(gate is PmosGate.CONDUCTING)
        assert c.state_bit is (SwitchState.ON_STATE if got[-1] else SwitchState.OFF_STATE)
    assert got == ref_control(m_on, m_off, k)


@given(st.integers(0, 5), st.integers(0, 5))
def test_control_waveform_equals_schedule(m_on, m_off):
    c = ControlCircuit(m_on, m_off)
    cycles = 3 * (m_on + m_off + 2)
    wave = control_waveform(c, cycles)
    sched = schedule_for_control(c)
    state = None
    for t_edge, on in wave:
        state = on
        # between this edge and the next the supply is constant at ``on``
        assert sched.at(t_edge) == state or t_edge == 0
    assert sched.duty == pytest.approx(c.duty)
    period = (m_on + m_off + 2) * 10
    for t in range(5, cycles * 10):
        expect = [on for te, on in wave if te <= t][-1]
        assert sched.at(t) == expect


def test_odd_clock_rejected():
    with pytest.raises(ValueError):
        control_waveform(ControlCircuit(1, 1), 4, clock_ns=9)


def test_certification_horizon():
    assert certification_horizon(default_params()) == 10 * 77 * 10


def test_critical_duty_baseline_only_bounded_by_horizon():
    # No off-time drain: only the short certification horizon keeps low duties safe.
    p = default_params()
    ref = critical_on_ns(p, 1000, certification_horizon(p)) / 1000
    got = critical_duty(p)
    assert ref - 0.01 <= got <= ref + 1e-3
    assert got < 0.2


def test_critical_duty_fortified_matches_oracle():
    p = default_params(fortified=True)
    got = critical_duty(p)
    ref = critical_on_ns(p, 1000, certification_horizon(p)) / 1000
    assert ref == pytest.approx(0.729, abs=1e-9)
    assert ref - 0.01 <= got <= ref + 1e-3
    assert 0.70 <= got < 0.75


def test_critical_duty_rejects_short_horizon():
    with pytest.raises(ScheduleError):
        critical_duty(default_params(fortified=True), horizon_ns=100)
    with pytest.raises(ValueError):
        critical_duty(default_params(fortified=True), tolerance=0)


def test_unreachable_threshold_never_fires():
    p = default_params(fortified=True, v_threshold=0.8, c_new=10_000.0)
    assert 0.70 < critical_duty(p, horizon_ns=certification_horizon(p)) <= 1.0


def test_duty_voltage_curve_monotone():
    rows = duty_voltage_curve(default_params(fortified=True), [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    vmax = [v for _, v, _ in rows]
    assert vmax == sorted(vmax)
    assert [f for *_, f in rows] == [False, False, False, True, True, True]
