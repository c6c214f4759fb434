"""Parsing, validation and canonical serialization of ``.bench`` netlists.

The accepted dialect covers ISCAS85 combinational files, ISCAS89 files with
``DFF`` elements (single implicit clock) and the ``MUX2`` extension used by
:func:`ahtsim.logicsim.wrap_state_saving`.
"""

from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

__all__ = [
    "GateKind",
    "Zone",
    "Gate",
    "Netlist",
    "NetlistError",
    "BenchSyntaxError",
    "UnknownGateKindError",
    "DanglingNetError",
    "CombinationalCycleError",
    "DuplicateNetError",
    "ReservedNetError",
    "UnusedNetWarning",
    "SEL_NET",
    "parse_bench",
    "load_bench",
    "load_benchmark",
    "bundled_benchmarks",
    "serialize_bench",
    "topo_order",
    "netlist_stats",
    "fanout",
]

#: Reserved name of the derived save-path select signal.
SEL_NET = "SEL"


class GateKind(str, enum.Enum):
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"
    DFF = "DFF"
    MUX2 = "MUX2"


class Zone(str, enum.Enum):
    DISRUPTIVE = "DISRUPTIVE"
    NON_DISRUPTIVE = "NON_DISRUPTIVE"


_KIND_ALIASES = {k.value: k for k in GateKind}
_KIND_ALIASES["BUFF"] = GateKind.BUF

_UNARY = {GateKind.NOT, GateKind.BUF, GateKind.DFF}
_SAVE_PATH = {GateKind.DFF, GateKind.MUX2}


class NetlistError(ValueError):
    """Base class of every netlist rejection."""

    diagnostics: tuple["NetlistError", ...] = ()


class BenchSyntaxError(NetlistError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownGateKindError(NetlistError):
    def __init__(self, kind: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}unknown gate kind {kind!r}")
        self.kind = kind
        self.line = line


class DanglingNetError(NetlistError):
    def __init__(self, net: str):
        super().__init__(f"net {net!r} is referenced but never driven")
        self.net = net


class CombinationalCycleError(NetlistError):
    def __init__(self, nets: Sequence[str]):
        super().__init__("combinational cycle through nets: " + ", ".join(nets))
        self.nets = tuple(nets)


class DuplicateNetError(NetlistError):
    def __init__(self, net: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}net {net!r} is driven more than once")
        self.net = net
        self.line = line


class ReservedNetError(NetlistError):
    def __init__(self, net: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}net name {net!r} is reserved for the derived select signal")
        self.net = net
        self.line = line


class UnusedNetWarning(UserWarning):
    """A gate output that is neither consumed nor a primary output."""


@dataclass(frozen=True)
class Gate:
    """One cell. ``output_net`` and ``input_nets`` are net ids."""

    output_net: int
    kind: GateKind
    input_nets: tuple[int, ...]
    zone: Zone = Zone.DISRUPTIVE

    def __post_init__(self):
        n = len(self.input_nets)
        if self.kind in _UNARY:
            ok = n == 1
        elif self.kind is GateKind.MUX2:
            ok = n == 3
        else:
            ok = n >= 2
        if not ok:
            raise NetlistError(f"{self.kind.value} gate cannot take {n} input(s)")
        if self.kind in _SAVE_PATH and self.zone is not Zone.NON_DISRUPTIVE:
            raise NetlistError(f"{self.kind.value} gates belong to the non-disruptive zone")


@dataclass(frozen=True, eq=False)
class Netlist:
    """Immutable, validated gate-level circuit graph.

    Net ids index :attr:`net_names`. Primary inputs come first, then gate
    outputs in gate order, then the reserved select net if referenced.
    """

    name: str
    net_names: tuple[str, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    gates: tuple[Gate, ...]
    net_index: Mapping[str, int] = field(repr=False)
    driver: tuple[int, ...] = field(repr=False)  # gate id per net, -1 for sources
    _topo: tuple[int, ...] = field(repr=False)

    @property
    def dff_count(self) -> int:
        return sum(1 for g in self.gates if g.kind is GateKind.DFF)

    @property
    def has_sel(self) -> bool:
        return SEL_NET in self.net_index

    def gate_name(self, gate_id: int) -> str:
        return self.net_names[self.gates[gate_id].output_net]

    def gate_driving(self, net: str) -> Gate | None:
        gid = self.driver[self.net_index[net]]
        return None if gid < 0 else self.gates[gid]

    def _key(self):
        gates = sorted(
            (self.net_names[g.output_net], g.kind.value,
             tuple(self.net_names[i] for i in g.input_nets), g.zone.value)
            for g in self.gates
        )
        return (self.inputs, self.outputs, tuple(gates))

    def __eq__(self, other):
        # Structural: gate listing order is not significant.
        if not isinstance(other, Netlist):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @classmethod
    def build(
        cls,
        name: str,
        inputs: Sequence[str],
        outputs: Sequence[str],
        gates: Iterable[tuple[str, GateKind | str, Sequence[str]] | tuple[str, GateKind | str, Sequence[str], Zone]],
    ) -> "Netlist":
        """Construct and validate from named gate tuples ``(out, kind, ins[, zone])``."""
        named = []
        for spec in gates:
            out, kind, ins = spec[0], spec[1], spec[2]
            kind = kind if isinstance(kind, GateKind) else _kind(str(kind))
            zone = spec[3] if len(spec) > 3 else _default_zone(kind)
            named.append((out, kind, tuple(ins), Zone(zone)))
        return _assemble(name, list(inputs), list(outputs), named, lines=None)


def _kind(text: str) -> GateKind:
    try:
        return _KIND_ALIASES[text.upper()]
    except KeyError:
        raise UnknownGateKindError(text) from None


def _default_zone(kind: GateKind) -> Zone:
    return Zone.NON_DISRUPTIVE if kind in _SAVE_PATH else Zone.DISRUPTIVE


def _assemble(name, inputs, outputs, named, lines) -> Netlist:
    errors: list[NetlistError] = []
    net_names: list[str] = []
    index: dict[str, int] = {}

    def line_of(i):
        return None if lines is None else lines[i]

    for pi in inputs:
        if pi == SEL_NET:
            errors.append(ReservedNetError(pi))
        elif pi in index:
            errors.append(DuplicateNetError(pi))
        else:
            index[pi] = len(net_names)
            net_names.append(pi)
    for i, (out, _, _, _) in enumerate(named):
        if out == SEL_NET:
            errors.append(ReservedNetError(out, line_of(i)))
        elif out in index:
            errors.append(DuplicateNetError(out, line_of(i)))
        else:
            index[out] = len(net_names)
            net_names.append(out)
    referenced = [n for _, _, ins, _ in named for n in ins]
    if SEL_NET in referenced:
        index[SEL_NET] = len(net_names)
        net_names.append(SEL_NET)
    seen_dangling = set()
    for n in referenced + list(outputs):
        if n not in index and n not in seen_dangling:
            seen_dangling.add(n)
            errors.append(DanglingNetError(n))
    if errors:
        _raise(errors)

    gates = []
    for out, kind, ins, zone in named:
        try:
            gates.append(Gate(index[out], kind, tuple(index[n] for n in ins), zone))
        except NetlistError as exc:
            errors.append(exc)
    if errors:
        _raise(errors)
    driver = [-1] * len(net_names)
    for gid, g in enumerate(gates):
        driver[g.output_net] = gid

    topo = _levelize(net_names, gates, driver)
    nl = Netlist(
        name=name,
        net_names=tuple(net_names),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        gates=tuple(gates),
        net_index=MappingProxyType(dict(index)),
        driver=tuple(driver),
        _topo=tuple(topo),
    )
    used = set(referenced) | set(outputs)
    unused = [net_names[g.output_net] for g in gates if net_names[g.output_net] not in used]
    if unused:
        warnings.warn(
            f"{name or 'netlist'}: {len(unused)} unreferenced gate output(s), e.g. {unused[0]!r}",
            UnusedNetWarning,
            stacklevel=3,
        )
    return nl


def _raise(errors: list[NetlistError]):
    first = errors[0]
    first.diagnostics = tuple(errors)
    raise first


def _levelize(net_names, gates, driver) -> list[int]:
    """Kahn's algorithm over combinational gates; DFF outputs are sources."""
    comb = [gid for gid, g in enumerate(gates) if g.kind is not GateKind.DFF]
    pending = {}
    consumers: dict[int, list[int]] = {}
    for gid in comb:
        deps = 0
        for n in gates[gid].input_nets:
            d = driver[n]
            if d >= 0 and gates[d].kind is not GateKind.DFF:
                deps += 1
                consumers.setdefault(d, []).append(gid)
        pending[gid] = deps
    ready = [gid for gid in comb if pending[gid] == 0]
    order = []
    head = 0
    while head < len(ready):
        gid = ready[head]
        head += 1
        order.append(gid)
        for c in consumers.get(gid, ()):
            pending[c] -= 1
            if pending[c] == 0:
                ready.append(c)
    if len(order) != len(comb):
        stuck = sorted(net_names[gates[g].output_net] for g in comb if pending[g] > 0)
        raise CombinationalCycleError(_cycle_core(stuck, net_names, gates, driver))
    return order


def _cycle_core(stuck, net_names, gates, driver) -> list[str]:
    # Strip gates that merely hang off a cycle: keep nets that both reach and
    # are reached from other stuck nets.
    stuck_set = set(stuck)
    preds = {}
    for name in stuck:
        g = gates[driver[net_names.index(name)]]
        preds[name] = {net_names[i] for i in g.input_nets if net_names[i] in stuck_set}
    changed = True
    alive = set(stuck)
    while changed:
        changed = False
        has_succ = {p for n in alive for p in preds[n] if p in alive}
        for n in list(alive):
            if not (preds[n] & alive) or n not in has_succ:
                alive.discard(n)
                changed = True
    return sorted(alive) or stuck


_LINE_IO = re.compile(r"^\s*(INPUT|OUTPUT)\s*\(\s*([^\s(),=#]+)\s*\)\s*$", re.IGNORECASE)
_LINE_GATE = re.compile(r"^\s*([^\s(),=#]+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")
_NET = re.compile(r"^[^\s(),=#]+$")


def parse_bench(text: str, name: str = "") -> Netlist:
    """Parse ``.bench`` source into a validated :class:`Netlist`.

    All malformed lines are diagnosed before raising; the first diagnostic is
    raised and the complete list is attached as ``exc.diagnostics``.
    Comment lines before the first statement of the form ``# name`` supply the
    netlist name when *name* is empty.
    """
    inputs: list[str] = []
    outputs: list[str] = []
    named = []
    lines = []
    errors: list[NetlistError] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip("\r")
        if not body.strip():
            if not name and not named and not inputs and raw.lstrip().startswith("#"):
                words = raw.lstrip("# \t").split()
                if len(words) == 1:
                    name = words[0]
            continue
        m = _LINE_IO.match(body)
        if m:
            (inputs if m.group(1).upper() == "INPUT" else outputs).append(m.group(2))
            continue
        m = _LINE_GATE.match(body)
        if not m:
            errors.append(BenchSyntaxError("expected INPUT(x), OUTPUT(x) or x = KIND(...)",
                                           lineno, _first_bad_column(body)))
            continue
        out, kind_text, arglist = m.groups()
        args = [a.strip() for a in arglist.split(",")]
        bad = [a for a in args if not _NET.match(a)]
        if bad:
            col = body.index("(", m.start(3) - 1) + 2
            errors.append(BenchSyntaxError(f"malformed operand list {arglist!r}", lineno, col))
            continue
        try:
            kind = _kind(kind_text)
        except UnknownGateKindError:
            errors.append(UnknownGateKindError(kind_text, lineno))
            continue
        named.append((out, kind, tuple(args), _default_zone(kind)))
        lines.append(lineno)
    if errors:
        _raise(errors)
    return _assemble(name, inputs, outputs, named, lines)


def _first_bad_column(body: str) -> int:
    stripped = body.lstrip()
    return len(body) - len(stripped) + 1


def load_bench(path: str | Path) -> Netlist:
    p = Path(path)
    return parse_bench(p.read_text(encoding="utf-8"), name=p.stem)


def bundled_benchmarks() -> list[str]:
    """Names of the benchmark netlists shipped with the package."""
    root = resources.files("ahtsim") / "data"
    return sorted(p.name[:-6] for p in root.iterdir() if p.name.endswith(".bench"))


def load_benchmark(name: str) -> Netlist:
    """Load a bundled benchmark, e.g. ``"c432"``."""
    res = resources.files("ahtsim") / "data" / f"{name}.bench"
    if not res.is_file():
        raise FileNotFoundError(f"no bundled benchmark named {name!r}")
    return parse_bench(res.read_text(encoding="utf-8"), name=name)


def topo_order(n: Netlist) -> list[int]:
    """Gate ids of the combinational gates, drivers before consumers."""
    return list(n._topo)


def serialize_bench(n: Netlist) -> str:
    """Canonical text: inputs, outputs, DFFs, then combinational gates in topo order."""
    names = n.net_names
    out = [f"# {n.name}"] if n.name else []
    out += [f"INPUT({x})" for x in n.inputs]
    out += [f"OUTPUT({x})" for x in n.outputs]
    order = [gid for gid, g in enumerate(n.gates) if g.kind is GateKind.DFF] + list(n._topo)
    for gid in order:
        g = n.gates[gid]
        kind = "BUFF" if g.kind is GateKind.BUF else g.kind.value
        args = ", ".join(names[i] for i in g.input_nets)
        out.append(f"{names[g.output_net]} = {kind}({args})")
    return "\n".join(out) + "\n"


def netlist_stats(n: Netlist) -> dict[str, int]:
    """Counts used by the area tables. ``gate_count`` includes DFFs."""
    return {
        "gate_count": len(n.gates),
        "dff_count": n.dff_count,
        "input_count": len(n.inputs),
        "output_count": len(n.outputs),
        "net_count": len(n.net_names),
    }


def fanout(n: Netlist) -> list[int]:
    """Number of gate inputs plus primary outputs fed by each net id."""
    counts = [0] * len(n.net_names)
    for g in n.gates:
        for i in g.input_nets:
            counts[i] += 1
    for o in n.outputs:
        counts[n.net_index[o]] += 1
    return counts
