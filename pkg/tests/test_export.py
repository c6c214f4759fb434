import numpy as np
import pytest

from ahtsim.aht import attach, default_params, inject_aht
from ahtsim.export import (
    empty_trace,
    instrumented_to_bench,
    load_instrumented,
    load_trace,
    parse_instrumented,
    save_trace,
    trace_to_csv,
    trace_to_vcd,
)
from ahtsim.logicsim import Stimulus, run, wrap_outputs
from ahtsim.netlist import load_benchmark, serialize_bench
from ahtsim.scenarios import test_case_1 as tc1
from ahtsim.vddctl import schedule_from_duty


@pytest.fixture(scope="module")
def tc1_trace():
    return tc1()


def _vcd_changes(text, ident):
    """(time, value) pairs for one VCD identifier code."""
    out, now = [], 0
    body = text.split("$enddefinitions $end", 1)[1]
    for tok in body.split():
        if tok.startswith("#"):
            now = int(tok[1:])
        elif tok.endswith(ident) and tok[:-len(ident)] in ("0", "1", "x"):
            out.append((now, tok[:-len(ident)]))
    return out


def _ident(text, name):
    for line in text.splitlines():
        parts = line.split()
        if parts[:1] == ["$var"] and parts[4] == name:
            return parts[3]
    raise KeyError(name)


def test_empty_trace_header_only():
    assert trace_to_vcd(empty_trace()) == "$timescale 1 ns $end\n$enddefinitions $end\n"


def test_vcd_header_has_no_date(tc1_trace):
    text = trace_to_vcd(tc1_trace)
    assert "$date" not in text and "$timescale 1 ns $end" in text


def test_vcd_test_case_waveform(tc1_trace):
    text = trace_to_vcd(tc1_trace)
    rail = _vcd_changes(text, _ident(text, "DISRUPTIVE"))
    assert (700, "0") in rail and (800, "1") in rail
    assert not [t for t, v in rail if 700 < t < 800]
    fired = _vcd_changes(text, _ident(text, "aht0_fired"))
    assert [t for t, v in fired if v == "1"] == [810]


def test_vcd_is_deterministic(tc1_trace):
    assert trace_to_vcd(tc1_trace) == trace_to_vcd(tc1())


def test_csv_columns_and_rows(tc1_trace):
    lines = trace_to_csv(tc1_trace).splitlines()
    head = lines[0].split(",")
    assert head[:2] == ["time_ns", "sel"] and "aht0_vcap" in head and "aht0_fired" in head
    assert len(lines) == len(tc1_trace) + 1
    row = dict(zip(head, lines[1 + 75].split(",")))
    assert row["time_ns"] == "750" and row["sel"] == "0"


def test_npz_roundtrip(tmp_path, tc1_trace):
    back = load_trace(save_trace(tc1_trace, tmp_path / "t.npz"))
    assert back.recorded == tc1_trace.recorded
    assert np.array_equal(back.values, tc1_trace.values)
    assert back.trigger_events == tc1_trace.trigger_events
    assert back.vdd_edges == tc1_trace.vdd_edges
    assert np.array_equal(back.v_cap["aht0"], tc1_trace.v_cap["aht0"])
    assert trace_to_vcd(back) == trace_to_vcd(tc1_trace)


def test_duty_cycled_trace_roundtrip(tmp_path):
    w = wrap_outputs(load_benchmark("c17"))
    t = run(w, Stimulus.random(w, 20, seed=3), schedule_from_duty(100, 0.6))
    back = load_trace(save_trace(t, tmp_path / "d.npz"))
    assert trace_to_csv(back) == trace_to_csv(t)


def test_pragma_roundtrip(tmp_path, c432):
    p = default_params(fortified=True)
    inst = inject_aht(c432, attach(c432, "118", "154", p, "FORCE_ONE", v_init=0.25))
    text = instrumented_to_bench(inst)
    assert text.splitlines()[1].startswith("# @aht ")
    back = parse_instrumented(text, "c432")
    assert back.netlist == c432
    (a,), (b,) = inst.ahts, back.ahts
    assert (a.victim_net, a.payload_net, a.params, a.payload_kind, a.state.v_cap) == \
           (b.victim_net, b.payload_net, b.params, b.payload_kind, b.state.v_cap)
    f = tmp_path / "c432.bench"  # the file stem names the netlist
    f.write_text(text)
    assert instrumented_to_bench(load_instrumented(f)) == text


def test_plain_bench_has_no_triggers(c432):
    assert parse_instrumented(serialize_bench(c432)).ahts == ()
