"""Cycle-accurate 0/1/X simulation with per-zone supply gating.

Each netlist is compiled once into straight-line Python over a dual-rail
encoding: a net holds ``(h, l)`` where ``h`` means "may be 1" and ``l`` means
"may be 0". ZERO is ``(0, 1)``, ONE is ``(1, 0)`` and X is ``(1, 1)``, so
Kleene AND/OR reduce to bitwise operations and NOT to a rail swap.

Clocking: cycle ``c`` spans ``[c*T, (c+1)*T)``. Combinational logic settles at
the start of the cycle, DFFs latch at its closing edge. A cycle is *powered*
(and SEL is ONE) only if the disruptive zone has VDD over the whole cycle;
otherwise every disruptive gate outputs X for that cycle and the cycle is a
stall. Stimulus vectors advance only after powered cycles, so the logical
computation pauses during stalls instead of losing inputs.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .aht import AhtInstance, InstrumentedNetlist, PayloadKind, TriggerEvent
from .logic import LogicValue
from .netlist import SEL_NET, GateKind, Netlist, NetlistError, UnusedNetWarning, Zone
from .vddctl import ScheduleError, VddSchedule, always_on

__all__ = [
    "InitPolicy",
    "SimState",
    "Stimulus",
    "Trace",
    "SimulationError",
    "init_state",
    "eval_cycle",
    "run",
    "wrap_state_saving",
    "wrap_outputs",
    "saved_output_nets",
]

class SimulationError(RuntimeError):
    pass


class InitPolicy(str, enum.Enum):
    ALL_ZERO = "ALL_ZERO"
    ALL_X = "ALL_X"


_RAIL = {LogicValue.ZERO: (0, 1), LogicValue.ONE: (1, 0), LogicValue.X: (1, 1)}


def _decode(h: int, l: int) -> LogicValue:
    return LogicValue(h + (h & l))


# ---------------------------------------------------------------------------
# compilation


def _gate_expr(kind: GateKind, ins: Sequence[int], o: int) -> list[str]:
    h = [f"h{i}" for i in ins]
    l = [f"l{i}" for i in ins]
    if kind in (GateKind.BUF, GateKind.DFF):
        return [f"h{o} = {h[0]}; l{o} = {l[0]}"]
    if kind is GateKind.NOT:
        return [f"h{o} = {l[0]}; l{o} = {h[0]}"]
    if kind is GateKind.MUX2:
        (hs, ha, hb), (ls, la, lb) = h, l
        return [f"h{o} = ({hs} & {ha}) | ({ls} & {hb}); l{o} = ({hs} & {la}) | ({ls} & {lb})"]
    if kind in (GateKind.AND, GateKind.NAND):
        hi, lo = " & ".join(h), " | ".join(l)
    elif kind in (GateKind.OR, GateKind.NOR):
        hi, lo = " | ".join(h), " & ".join(l)
    else:
        lines = [f"th = {h[0]}; tl = {l[0]}"]
        for a, b in zip(h[1:], l[1:]):
            lines.append(f"th, tl = (th & {b}) | (tl & {a}), (th & {a}) | (tl & {b})")
        if kind is GateKind.XOR:
            lines.append(f"h{o} = th; l{o} = tl")
        else:
            lines.append(f"h{o} = tl; l{o} = th")
        return lines
    if kind in (GateKind.NAND, GateKind.NOR):
        hi, lo = lo, hi
    return [f"h{o} = {hi}; l{o} = {lo}"]


def _payload_expr(kind: PayloadKind, o: int, flag: int) -> str:
    if kind is PayloadKind.XOR_FLIP:
        return f"if F[{flag}]: h{o}, l{o} = l{o}, h{o}"
    if kind is PayloadKind.FORCE_ONE:
        return f"if F[{flag}]: h{o} = 1; l{o} = 0"
    return f"if F[{flag}]: h{o} = 0; l{o} = 1"


class _Compiled:
    """Evaluator pair (powered / unpowered disruptive zone) for one netlist."""

    def __init__(self, n: Netlist, payloads: Sequence[tuple[int, PayloadKind]] = ()):
        self.n = n
        nets = len(n.net_names)
        self.sources = [i for i in range(nets) if n.driver[i] < 0 or n.gates[n.driver[i]].kind is GateKind.DFF]
        overrides = {}
        for flag, (net, kind) in enumerate(payloads):
            overrides.setdefault(net, []).append(_payload_expr(kind, net, flag))
        self.on = self._build(powered=True, overrides=overrides)
        self.off = self._build(powered=False, overrides=overrides)

    def _build(self, powered: bool, overrides):
        n = self.n
        body = []
        for i in self.sources:
            body.append(f"h{i} = H[{i}]; l{i} = L[{i}]")
            body += overrides.get(i, [])
        for gid in n._topo:
            g = n.gates[gid]
            o = g.output_net
            if not powered and g.zone is Zone.DISRUPTIVE:
                body.append(f"h{o} = 1; l{o} = 1")
            else:
                body += _gate_expr(g.kind, g.input_nets, o)
            body += overrides.get(o, [])
        nets = range(len(n.net_names))
        body.append("return [" + ", ".join(f"h{i}" for i in nets) + "], [" + ", ".join(f"l{i}" for i in nets) + "]")
        src = "def _eval(H, L, F):\n    " + "\n    ".join(body) + "\n"
        scope: dict = {}
        exec(compile(src, f"<compiled {n.name or 'netlist'}>", "exec"), scope)
        return scope["_eval"]


_CACHE: dict[tuple[int, tuple], _Compiled] = {}


def _compiled(n: Netlist, payloads=()) -> _Compiled:
    key = (id(n), tuple(payloads))
    hit = _CACHE.get(key)
    if hit is None or hit.n is not n:
        if len(_CACHE) > 64:
            _CACHE.clear()
        hit = _CACHE[key] = _Compiled(n, payloads)
    return hit


# ---------------------------------------------------------------------------
# state-level API


@dataclass(frozen=True)
class SimState:
    """Values observed during one cycle plus the DFF contents entering it.

    ``net_values`` is indexed by net id; ``dff_values`` follows the order of
    DFF gates in ``netlist.gates``.
    """

    netlist: Netlist = field(repr=False, compare=False)
    net_values: tuple[LogicValue, ...]
    dff_values: tuple[LogicValue, ...]
    time_ns: int = 0
    cycle: int = 0
    clock_period_ns: int = 10

    def value(self, net: str) -> LogicValue:
        return self.net_values[self.netlist.net_index[net]]


def _dff_ids(n: Netlist) -> list[int]:
    return [gid for gid, g in enumerate(n.gates) if g.kind is GateKind.DFF]


def _input_rails(n: Netlist, inputs) -> list[tuple[int, int]]:
    vals = [LogicValue.coerce(v) for v in inputs]
    if len(vals) != len(n.inputs):
        raise ValueError(f"expected {len(n.inputs)} input values, got {len(vals)}")
    return [_RAIL[v] for v in vals]


def _evaluate(n: Netlist, dff_values, inputs, powered: bool, fired=()):
    comp = _compiled(n)
    nets = len(n.net_names)
    H, L = [1] * nets, [1] * nets
    for i, (h, l) in enumerate(_input_rails(n, inputs)):
        H[i], L[i] = h, l
    for gid, v in zip(_dff_ids(n), dff_values):
        o = n.gates[gid].output_net
        H[o], L[o] = _RAIL[v]
    if n.has_sel:
        s = n.net_index[SEL_NET]
        H[s], L[s] = (1, 0) if powered else (0, 1)
    hs, ls = (comp.on if powered else comp.off)(H, L, fired)
    return tuple(_decode(h, l) for h, l in zip(hs, ls))


def init_state(
    n: Netlist,
    policy: InitPolicy | str | Sequence = InitPolicy.ALL_ZERO,
    inputs: Sequence | None = None,
    clock_period_ns: int = 10,
) -> SimState:
    """DFFs set per *policy*, combinational nets evaluated once (powered)."""
    k = n.dff_count
    if isinstance(policy, (InitPolicy, str)) and str(getattr(policy, "value", policy)) in InitPolicy.__members__:
        fill = LogicValue.ZERO if InitPolicy(policy) is InitPolicy.ALL_ZERO else LogicValue.X
        dffs = (fill,) * k
    else:
        dffs = tuple(LogicValue.coerce(v) for v in policy)
        if len(dffs) != k:
            raise ValueError(f"initial vector has {len(dffs)} values for {k} DFFs")
    inputs = [LogicValue.ZERO] * len(n.inputs) if inputs is None else inputs
    values = _evaluate(n, dffs, inputs, powered=True)
    return SimState(n, values, dffs, 0, 0, clock_period_ns)


def eval_cycle(state: SimState, inputs: Sequence, vdd_on: Mapping[Zone, bool] | bool = True) -> SimState:
    """Evaluate the cycle ``state.cycle`` and latch DFFs at its closing edge.

    *vdd_on* tells whether each zone was powered for the whole cycle; the
    non-disruptive zone is always treated as powered. The returned state holds
    the values seen during the evaluated cycle and the freshly latched DFFs.
    """
    n = state.netlist
    if isinstance(vdd_on, Mapping):
        powered = bool(vdd_on.get(Zone.DISRUPTIVE, True))
    else:
        powered = bool(vdd_on)
    values = _evaluate(n, state.dff_values, inputs, powered)
    latched = tuple(values[n.gates[gid].input_nets[0]] for gid in _dff_ids(n))
    return SimState(n, values, latched, state.time_ns + state.clock_period_ns, state.cycle + 1, state.clock_period_ns)


# ---------------------------------------------------------------------------
# stimulus and traces


@dataclass(frozen=True, eq=False)
class Stimulus:
    """Per-cycle primary-input vectors (0/1 only), one row per logical cycle."""

    vectors: np.ndarray
    clock_period_ns: int = 10

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.uint8)
        if v.ndim != 2:
            raise ValueError("vectors must be a 2-D array (cycles x inputs)")
        if v.size and v.max() > 1:
            raise ValueError("stimulus values must be 0 or 1")
        if self.clock_period_ns <= 0:
            raise ValueError("clock_period_ns must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return len(self.vectors)

    def __eq__(self, other):
        return (isinstance(other, Stimulus) and self.clock_period_ns == other.clock_period_ns
                and np.array_equal(self.vectors, other.vectors))

    @classmethod
    def random(cls, n: Netlist, cycles: int, seed: int, clock_period_ns: int = 10) -> "Stimulus":
        rng = np.random.default_rng(seed)
        return cls(rng.integers(0, 2, size=(cycles, len(n.inputs)), dtype=np.uint8), clock_period_ns)

    @classmethod
    def constant(cls, n: Netlist, cycles: int, value: int = 0, clock_period_ns: int = 10) -> "Stimulus":
        return cls(np.full((cycles, len(n.inputs)), value, dtype=np.uint8), clock_period_ns)

    @classmethod
    def alternating(cls, n: Netlist, net: str, cycles: int, clock_period_ns: int = 10,
                    background: Sequence[int] | None = None) -> "Stimulus":
        """Input *net* flips every cycle (starting at 0); others hold *background*."""
        base = np.zeros(len(n.inputs), dtype=np.uint8) if background is None else np.asarray(background, np.uint8)
        v = np.tile(base, (cycles, 1))
        v[:, n.inputs.index(net)] = np.arange(cycles) % 2
        return cls(v, clock_period_ns)

    @classmethod
    def repeat(cls, rows: Sequence[Sequence[int]], cycles: int, clock_period_ns: int = 10) -> "Stimulus":
        rows = np.asarray(rows, dtype=np.uint8)
        return cls(rows[np.arange(cycles) % len(rows)], clock_period_ns)


@dataclass(eq=False)
class Trace:
    """Samples taken at every cycle start of one run.

    ``values[i, j]`` is the code (0, 1, 2 for X) of net ``recorded[j]`` during
    the cycle starting at ``times_ns[i]``. Supply edges that fall inside a
    cycle are kept exactly in ``vdd_edges``.
    """

    recorded: tuple[str, ...]
    times_ns: np.ndarray
    values: np.ndarray
    vdd: dict[str, np.ndarray]
    sel: np.ndarray
    logical: np.ndarray
    v_cap: dict[str, np.ndarray]
    fired: dict[str, np.ndarray]
    trigger_events: list[TriggerEvent]
    vdd_edges: list[tuple[int, str, bool]]
    clock_period_ns: int
    horizon_ns: int

    def __len__(self) -> int:
        return len(self.times_ns)

    @cached_property
    def signals(self) -> dict[str, list[LogicValue]]:
        return {name: [LogicValue(int(c)) for c in self.values[:, j]] for j, name in enumerate(self.recorded)}

    def column(self, net: str) -> np.ndarray:
        return self.values[:, self.recorded.index(net)]

    def logical_samples(self, nets: Sequence[str]) -> np.ndarray:
        """Values of *nets* right after each powered cycle's closing edge.

        Row ``k`` belongs to logical cycle ``k``. Meant for DFF (saved) outputs,
        which change only at edges.
        """
        cols = [self.recorded.index(x) for x in nets]
        idx = np.flatnonzero(self.sel[:-1]) + 1
        return self.values[np.ix_(idx, cols)]

    @property
    def stall_fraction(self) -> float:
        return float(1.0 - self.sel.mean()) if len(self.sel) else 0.0


# ---------------------------------------------------------------------------
# run loop


def _resolve_schedule(schedule) -> VddSchedule:
    if schedule is None:
        return always_on()
    if isinstance(schedule, VddSchedule):
        return schedule
    sched = None
    for zone, s in dict(schedule).items():
        zone = Zone(zone)
        if zone is Zone.NON_DISRUPTIVE:
            if not s.always_on:
                raise ScheduleError("the non-disruptive zone is never duty-cycled")
        else:
            sched = s
    return sched or always_on()


def run(
    n: Netlist | InstrumentedNetlist,
    s: Stimulus,
    sched: VddSchedule | Mapping[Zone, VddSchedule] | None = None,
    ahts: Sequence[AhtInstance] = (),
    horizon_ns: int | None = None,
    init: InitPolicy | str | Sequence = InitPolicy.ALL_ZERO,
    record: Sequence[str] | None = None,
) -> Trace:
    """Simulate *n* under *s* and the disruptive-zone schedule *sched*.

    With ``horizon_ns=None`` the run lasts until every stimulus vector has been
    consumed by a powered cycle, plus one cycle to expose the last latched
    result. Otherwise it covers ``horizon_ns // T`` cycles and holds the last
    vector once the stimulus is exhausted. Attached AHTs are stepped at every
    cycle start and at every supply edge. Their states are copied, so the
    caller's instances are left untouched. *record* picks the traced nets
    (default: all).
    """
    if isinstance(n, InstrumentedNetlist):
        ahts = list(n.ahts) + list(ahts)
        n = n.netlist
    if len(s) == 0:
        raise SimulationError("stimulus has no vectors")
    if s.vectors.shape[1] != len(n.inputs):
        raise SimulationError(f"stimulus drives {s.vectors.shape[1]} inputs, netlist has {len(n.inputs)}")
    T = s.clock_period_ns
    sched = _resolve_schedule(sched)
    if horizon_ns is not None:
        if horizon_ns < T:
            raise SimulationError("horizon must cover at least one clock period")
        if sched.horizon_ns is not None and sched.horizon_ns < horizon_ns:
            raise ScheduleError(f"schedule horizon {sched.horizon_ns} ns is shorter than the run ({horizon_ns} ns)")
        max_cycles = horizon_ns // T
    else:
        if not sched.always_on and sched.on_ns < T and sched.period_ns > 0:
            raise ScheduleError("on-window shorter than one clock; the stimulus would never drain")
        max_cycles = None

    ahts = [a.fresh() for a in ahts]
    names = [a.name for a in ahts]
    if len(set(names)) != len(names):
        raise SimulationError("attached AHTs need distinct names")
    for a in ahts:
        for net in (a.victim_net, a.payload_net):
            if not 0 <= net < len(n.net_names):
                raise SimulationError(f"{a.name}: net id {net} not in netlist")
    comp = _compiled(n, tuple((a.payload_net, a.payload_kind) for a in ahts))
    f_on, f_off = comp.on, comp.off

    nets = len(n.net_names)
    dffs = _dff_ids(n)
    dff_out = [n.gates[g].output_net for g in dffs]
    dff_in = [n.gates[g].input_nets[0] for g in dffs]
    sel_id = n.net_index.get(SEL_NET)
    rec_names = tuple(n.net_names) if record is None else tuple(record)
    rec_ids = [n.net_index[x] for x in rec_names]
    rec_all = record is None

    st0 = init_state(n, init)
    H, L = [1] * nets, [1] * nets
    for o, v in zip(dff_out, st0.dff_values):
        H[o], L[o] = _RAIL[v]
    rails = [[_RAIL[LogicValue(int(b))] for b in row] for row in np.unique(s.vectors, axis=0)]
    row_key = {tuple(int(b) for b in r): i for i, r in enumerate(np.unique(s.vectors, axis=0))}
    row_of = [row_key[tuple(int(b) for b in r)] for r in s.vectors]
    n_vec = len(s)
    n_in = len(n.inputs)

    fired = [False] * len(ahts)
    h_rows, l_rows = [], []
    times, vdd_s, sel_s, logical_s = [], [], [], []
    vcap = [[] for _ in ahts]
    fir = [[] for _ in ahts]
    events: list[TriggerEvent] = []
    edges_out: list[tuple[int, str, bool]] = []
    k = 0
    c = 0
    extra = None  # cycles left after the stimulus drained (horizon_ns=None mode)
    while True:
        if max_cycles is not None and c >= max_cycles:
            break
        if max_cycles is None and extra is not None:
            if extra == 0:
                break
            extra -= 1
        t = c * T
        powered = sched.powered_between(t, t + T)
        for i, (h, l) in enumerate(rails[row_of[min(k, n_vec - 1)]]):
            H[i] = h
            L[i] = l
        if sel_id is not None:
            H[sel_id], L[sel_id] = (1, 0) if powered else (0, 1)
        fn = f_on if powered else f_off
        hs, ls = fn(H, L, fired)
        vdd_now = sched.at(t)
        if ahts:
            before = list(fired)
            for j, a in enumerate(ahts):
                vi = a.victim_net
                ev = a.step(_decode(hs[vi], ls[vi]), vdd_now, t)
                if ev is not None:
                    events.append(ev)
                fired[j] = a.state.fired
            if fired != before:
                hs, ls = fn(H, L, fired)
        times.append(t)
        vdd_s.append(vdd_now)
        sel_s.append(powered)
        logical_s.append(k)
        for j, a in enumerate(ahts):
            vcap[j].append(a.state.v_cap)
            fir[j].append(a.state.fired)
        if rec_all:
            h_rows.append(bytes(hs))
            l_rows.append(bytes(ls))
        else:
            h_rows.append(bytes([hs[i] for i in rec_ids]))
            l_rows.append(bytes([ls[i] for i in rec_ids]))
        for te, on in sched.edges(t - 1, t + T):
            if te > 0:
                edges_out.append((te, Zone.DISRUPTIVE.value, on))
            if te == t:
                continue
            for j, a in enumerate(ahts):
                vi = a.victim_net
                ev = a.step(_decode(hs[vi], ls[vi]), on, te)
                if ev is not None:
                    events.append(ev)
                fired[j] = a.state.fired
        for o, d in zip(dff_out, dff_in):
            H[o] = hs[d]
            L[o] = ls[d]
        if powered:
            k += 1
            if max_cycles is None and k >= n_vec and extra is None:
                extra = 1
        c += 1
        if max_cycles is None and c > 1000 * (n_vec + 1):
            raise SimulationError("stimulus is not draining; check the schedule")

    width = nets if rec_all else len(rec_ids)
    h = np.frombuffer(b"".join(h_rows), dtype=np.uint8).reshape(len(times), width)
    l = np.frombuffer(b"".join(l_rows), dtype=np.uint8).reshape(len(times), width)
    values = (h + (h & l)).astype(np.int8)
    horizon = c * T if horizon_ns is None else horizon_ns
    return Trace(
        recorded=rec_names,
        times_ns=np.asarray(times, dtype=np.int64),
        values=values,
        vdd={Zone.DISRUPTIVE.value: np.asarray(vdd_s, dtype=bool), Zone.NON_DISRUPTIVE.value: np.ones(len(times), bool)},
        sel=np.asarray(sel_s, dtype=bool),
        logical=np.asarray(logical_s, dtype=np.int64),
        v_cap={a.name: np.asarray(v, dtype=np.float64) for a, v in zip(ahts, vcap)},
        fired={a.name: np.asarray(f, dtype=bool) for a, f in zip(ahts, fir)},
        trigger_events=events,
        vdd_edges=edges_out,
        clock_period_ns=T,
        horizon_ns=horizon,
    )


# ---------------------------------------------------------------------------
# state-saving rewriter

_RAW = "__raw"
_MUX = "__mux"


def _named_gates(n: Netlist):
    names = n.net_names
    return [(names[g.output_net], g.kind, [names[i] for i in g.input_nets], g.zone) for g in n.gates]


def _is_wrapped(n: Netlist, net: str) -> bool:
    g = n.gate_driving(net)
    if g is None or g.kind is not GateKind.DFF:
        return False
    m = n.gates[n.driver[g.input_nets[0]]] if n.driver[g.input_nets[0]] >= 0 else None
    return m is not None and m.kind is GateKind.MUX2 and n.net_names[m.input_nets[0]] == SEL_NET


def wrap_state_saving(n: Netlist, saved_nets: Sequence[str]) -> Netlist:
    """Route each listed net through a SEL-controlled hold register.

    For a saved net ``x`` the driving gate is renamed to ``x__raw`` and
    ``x__mux = MUX2(SEL, x__raw, x)`` plus ``x = DFF(x__mux)`` are added, so
    every former consumer of ``x`` (including primary outputs) now reads the
    saved copy.
    """
    saved = list(saved_nets)
    if not saved:
        return n
    if len(set(saved)) != len(saved):
        raise NetlistError("saved_nets lists a net twice")
    for x in saved:
        if x not in n.net_index:
            raise NetlistError(f"net {x!r} not found")
        if _is_wrapped(n, x):
            raise NetlistError(f"net {x!r} is already wrapped")
        g = n.gate_driving(x)
        if g is None or g.zone is not Zone.DISRUPTIVE:
            raise NetlistError(f"net {x!r} is not driven by a disruptive-zone gate")
        for suffix in (_RAW, _MUX):
            if x + suffix in n.net_index:
                raise NetlistError(f"net name {x + suffix!r} already in use")
    chosen = set(saved)
    gates = []
    for out, kind, ins, zone in _named_gates(n):
        if out in chosen:
            gates.append((out + _RAW, kind, ins, zone))
            gates.append((out + _MUX, GateKind.MUX2, [SEL_NET, out + _RAW, out], Zone.NON_DISRUPTIVE))
            gates.append((out, GateKind.DFF, [out + _MUX], Zone.NON_DISRUPTIVE))
        else:
            gates.append((out, kind, ins, zone))
    return _rebuild(n, gates)


def _rebuild(n: Netlist, gates) -> Netlist:
    # Unused nets were already reported when *n* was built.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnusedNetWarning)
        return Netlist.build(n.name, n.inputs, n.outputs, gates)


def wrap_outputs(n: Netlist, hold_state: bool = True) -> Netlist:
    """Wrap every primary output driven by disruptive logic.

    With *hold_state*, existing DFFs additionally get a SEL-controlled hold
    multiplexer on their D input so sequential state also survives stalls.
    """
    targets = []
    for o in n.outputs:
        g = n.gate_driving(o)
        if g is not None and g.zone is Zone.DISRUPTIVE and o not in targets:
            targets.append(o)
    w = wrap_state_saving(n, targets)
    if not hold_state:
        return w
    gates = []
    touched = False
    for out, kind, ins, zone in _named_gates(w):
        if kind is GateKind.DFF and not _is_wrapped(w, out):
            hold = out + "__hold"
            gates.append((hold, GateKind.MUX2, [SEL_NET, ins[0], out], Zone.NON_DISRUPTIVE))
            gates.append((out, kind, [hold], zone))
            touched = True
        else:
            gates.append((out, kind, ins, zone))
    return _rebuild(w, gates) if touched else w


def saved_output_nets(n: Netlist) -> list[str]:
    """Primary outputs that are held by a save register."""
    return [o for o in n.outputs if _is_wrapped(n, o) or (n.gate_driving(o) is not None
                                                         and n.gate_driving(o).kind is GateKind.DFF)]
