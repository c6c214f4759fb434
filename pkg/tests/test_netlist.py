import warnings

import pytest
from hypothesis import given

from ahtsim.netlist import (
    BenchSyntaxError,
    CombinationalCycleError,
    DanglingNetError,
    DuplicateNetError,
    GateKind,
    Netlist,
    NetlistError,
    ReservedNetError,
    UnknownGateKindError,
    UnusedNetWarning,
    Zone,
    bundled_benchmarks,
    fanout,
    load_bench,
    load_benchmark,
    netlist_stats,
    parse_bench,
    serialize_bench,
    topo_order,
)

from strategies import netlists

C17 = """# c17
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
"""


def test_parse_c17_text():
    n = parse_bench(C17)
    assert n.name == "c17"
    assert n.inputs == ("1", "2", "3", "6", "7")
    assert n.outputs == ("22", "23")
    assert len(n.gates) == 6
    assert all(g.kind is GateKind.NAND for g in n.gates)
    assert n == load_benchmark("c17")


@pytest.mark.parametrize(
    "name,stats",
    [
        ("c17", dict(gate_count=6, dff_count=0, input_count=5, output_count=2, net_count=11)),
        ("c432", dict(gate_count=160, dff_count=0, input_count=36, output_count=7, net_count=196)),
        ("c880", dict(gate_count=383, dff_count=0, input_count=60, output_count=26, net_count=443)),
        ("s27", dict(gate_count=13, dff_count=3, input_count=4, output_count=1, net_count=17)),
    ],
)
def test_bundled_stats(name, stats):
    assert netlist_stats(load_benchmark(name)) == stats


def test_bundled_list():
    assert {"c17", "c432", "c880", "s27", "half_adder"} <= set(bundled_benchmarks())


def test_half_adder_builds_via_api():
    ha = Netlist.build("half_adder", ["a", "b"], ["sum", "carry"],
                       [("sum", "XOR", ["a", "b"]), ("carry", "AND", ["a", "b"])])
    assert ha == load_benchmark("half_adder")


def test_buff_alias_and_case():
    n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = buff(a)\n")
    assert n.gates[0].kind is GateKind.BUF
    assert "y = BUFF(a)" in serialize_bench(n)


def test_comments_and_blank_lines():
    n = parse_bench("# top\n\nINPUT(a)  # pin\nOUTPUT(y)\n\ny = NOT(a) # inv\n")
    assert n.name == "top" and len(n.gates) == 1


def test_syntax_error_location():
    with pytest.raises(BenchSyntaxError) as e:
        parse_bench("INPUT(a)\nOUTPUT(y)\n   y == NOT(a)\n")
    assert (e.value.line, e.value.column) == (3, 4)


def test_all_diagnostics_collected():
    with pytest.raises(NetlistError) as e:
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = FOO(a)\nz = ???\nw = BAR(a)\n")
    kinds = [type(d) for d in e.value.diagnostics]
    assert kinds == [UnknownGateKindError, BenchSyntaxError, UnknownGateKindError]


def test_unknown_kind():
    with pytest.raises(UnknownGateKindError) as e:
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = MAJ(a, a)\n")
    assert e.value.kind == "MAJ" and e.value.line == 3


def test_dangling_net():
    with pytest.raises(DanglingNetError) as e:
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, b)\n")
    assert e.value.net == "b"


def test_dangling_output():
    with pytest.raises(DanglingNetError):
        parse_bench("INPUT(a)\nOUTPUT(z)\ny = NOT(a)\n")


def test_duplicate_driver():
    with pytest.raises(DuplicateNetError) as e:
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUFF(a)\n")
    assert e.value.line == 4


def test_reserved_select_name():
    with pytest.raises(ReservedNetError):
        parse_bench("INPUT(SEL)\nOUTPUT(y)\ny = NOT(SEL)\n")


def test_combinational_cycle_names_nets():
    with pytest.raises(CombinationalCycleError) as e:
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, z)\nz = NOT(y)\n")
    assert set(e.value.nets) == {"y", "z"}


def test_cycle_through_dff_is_fine():
    n = parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(d)\nd = XOR(a, q)\n")
    assert n.dff_count == 1
    assert n.gates[0].zone is Zone.NON_DISRUPTIVE


def test_arity_checked():
    with pytest.raises(NetlistError):
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a)\n")
    with pytest.raises(NetlistError):
        parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NOT(a, b)\n")


def test_unused_output_warns_not_fails():
    with pytest.warns(UnusedNetWarning):
        n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\nt = BUFF(a)\n")
    assert len(n.gates) == 2


def test_sel_is_appended_once_referenced():
    n = Netlist.build("m", ["a", "b"], ["y"], [("y", "MUX2", ["SEL", "a", "b"])])
    assert n.has_sel and n.net_names[-1] == "SEL"


def test_save_path_cells_must_be_non_disruptive():
    with pytest.raises(NetlistError):
        Netlist.build("m", ["a"], ["q"], [("q", "DFF", ["a"], Zone.DISRUPTIVE)])


def test_load_bench_uses_file_stem(tmp_path):
    p = tmp_path / "tiny.bench"
    p.write_text("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n")
    assert load_bench(p).name == "tiny"


def test_missing_benchmark():
    with pytest.raises(FileNotFoundError):
        load_benchmark("c9999")


def test_fanout_counts_outputs():
    n = load_benchmark("c17")
    fo = dict(zip(n.net_names, fanout(n)))
    assert fo["11"] == 2 and fo["16"] == 2 and fo["22"] == 1 and fo["3"] == 2


def _topo_ok(n):
    seen = set(n.inputs) | {n.net_names[g.output_net] for g in n.gates if g.kind is GateKind.DFF} | {"SEL"}
    for gid in topo_order(n):
        g = n.gates[gid]
        if not all(n.net_names[i] in seen for i in g.input_nets):
            return False
        seen.add(n.net_names[g.output_net])
    return len(topo_order(n)) == sum(1 for g in n.gates if g.kind is not GateKind.DFF)


@pytest.mark.parametrize("name", ["c17", "c432", "c880", "s27", "half_adder"])
def test_bundled_roundtrip_and_topo(name):
    n = load_benchmark(name)
    text = serialize_bench(n)
    again = parse_bench(text)
    assert again == n and again.name == n.name
    assert serialize_bench(again) == text
    assert _topo_ok(n)


@given(netlists())
def test_random_roundtrip_fixpoint(n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnusedNetWarning)
        again = parse_bench(serialize_bench(n))
    assert again == n
    assert serialize_bench(again) == serialize_bench(n)


@given(netlists())
def test_random_topo_order_valid(n):
    assert _topo_ok(n)


def test_structural_equality_ignores_gate_order():
    a = Netlist.build("x", ["a", "b"], ["y"], [("t", "NOT", ["a"]), ("y", "AND", ["t", "b"])])
    b = Netlist.build("x", ["a", "b"], ["y"], [("y", "AND", ["t", "b"]), ("t", "NOT", ["a"])])
    assert a == b and hash(a) == hash(b)
