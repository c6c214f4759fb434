"""Trace serialization: VCD for waveform viewers, CSV, and a lossless ``.npz``."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np
from vcd import VCDWriter

from .aht import TriggerEvent
from .logicsim import Trace

__all__ = ["trace_to_vcd", "write_vcd", "trace_to_csv", "write_csv", "save_trace", "load_trace", "empty_trace",
           "instrumented_to_bench", "parse_instrumented", "load_instrumented"]

_VCD_VALUE = {0: 0, 1: 1, 2: "x"}
_TRACE_FORMAT = 1


def empty_trace(recorded=(), clock_period_ns: int = 10) -> Trace:
    return Trace(
        recorded=tuple(recorded),
        times_ns=np.zeros(0, np.int64),
        values=np.zeros((0, len(recorded)), np.int8),
        vdd={},
        sel=np.zeros(0, bool),
        logical=np.zeros(0, np.int64),
        v_cap={},
        fired={},
        trigger_events=[],
        vdd_edges=[],
        clock_period_ns=clock_period_ns,
        horizon_ns=0,
    )


def _fired_changes(t: Trace, name: str) -> list[tuple[int, bool]]:
    """Rising edges at the exact event time, falling edges at the cycle they are seen."""
    rises = sorted(e.time_ns for e in t.trigger_events if e.aht == name)
    out, state = [], bool(t.fired[name][0]) if len(t) else False
    for i, f in enumerate(t.fired[name]):
        if i and bool(f) != state and not f:
            out.append((int(t.times_ns[i]), False))
        state = bool(f)
    out += [(r, True) for r in rises]
    return sorted(out)


def trace_to_vcd(t: Trace, scope: str = "top") -> str:
    """Render *t* as VCD text with a 1 ns timescale and no date stamp.

    Nets change at cycle starts; supply rails change at their exact edges.
    A trace with no samples yields just the header.
    """
    buf = io.StringIO()
    with VCDWriter(buf, timescale="1 ns", date="") as w:
        if not len(t):
            return _header_only(buf, w)
        nets = [w.register_var(scope, name, "wire", size=1, init="x") for name in t.recorded]
        sel = w.register_var(scope, "SEL_valid", "wire", size=1, init="x")
        rails = {z: w.register_var(f"{scope}.vdd", z, "wire", size=1, init=int(bool(v[0])))
                 for z, v in sorted(t.vdd.items())}
        caps = {a: w.register_var(f"{scope}.aht", f"{a}_vcap", "real", init=0.0) for a in sorted(t.v_cap)}
        fires = {a: w.register_var(f"{scope}.aht", f"{a}_fired", "wire", size=1, init=0) for a in sorted(t.fired)}

        changes: list[tuple[int, int, object, object]] = []  # (time, order, var, value)
        prev = None
        for i, time in enumerate(t.times_ns.tolist()):
            row = t.values[i]
            for j, var in enumerate(nets):
                if prev is None or row[j] != prev[j]:
                    changes.append((time, 0, var, _VCD_VALUE[int(row[j])]))
            prev = row
            if i == 0 or t.sel[i] != t.sel[i - 1]:
                changes.append((time, 0, sel, int(bool(t.sel[i]))))
            for a, var in caps.items():
                if i == 0 or t.v_cap[a][i] != t.v_cap[a][i - 1]:
                    changes.append((time, 2, var, float(t.v_cap[a][i])))
        for te, zone, on in t.vdd_edges:
            if zone in rails:
                changes.append((te, 1, rails[zone], int(on)))
        for a, var in fires.items():
            changes += [(te, 3, var, int(v)) for te, v in _fired_changes(t, a)]
        for time, _, var, value in sorted(changes, key=lambda c: (c[0], c[1])):
            w.change(var, time, value)
    return buf.getvalue()


def _header_only(buf: io.StringIO, w: VCDWriter) -> str:
    w.close()
    return buf.getvalue()


def write_vcd(t: Trace, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(trace_to_vcd(t), newline="\n")
    return path


def trace_to_csv(t: Trace) -> str:
    """One row per sample: time, SEL, supply rails, recorded nets, trigger state."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    zones = sorted(t.vdd)
    ahts = sorted(t.v_cap)
    w.writerow(["time_ns", "sel", *(f"vdd_{z}" for z in zones), *t.recorded,
                *(f"{a}_vcap" for a in ahts), *(f"{a}_fired" for a in ahts)])
    for i in range(len(t)):
        w.writerow([
            int(t.times_ns[i]), int(bool(t.sel[i])),
            *(int(bool(t.vdd[z][i])) for z in zones),
            *(_VCD_VALUE[int(v)] for v in t.values[i]),
            *(f"{t.v_cap[a][i]:.12g}" for a in ahts),
            *(int(bool(t.fired[a][i])) for a in ahts),
        ])
    return buf.getvalue()


def write_csv(t: Trace, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(trace_to_csv(t), newline="\n")
    return path


def save_trace(t: Trace, path: str | Path) -> Path:
    """Store every field of *t* in an ``.npz`` archive (no pickles)."""
    path = Path(path)
    meta = {
        "format": _TRACE_FORMAT,
        "recorded": list(t.recorded),
        "zones": sorted(t.vdd),
        "ahts": sorted(t.v_cap),
        "events": [[e.time_ns, e.aht] for e in t.trigger_events],
        "vdd_edges": [list(e) for e in t.vdd_edges],
        "clock_period_ns": t.clock_period_ns,
        "horizon_ns": t.horizon_ns,
    }
    arrays = {
        "meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
        "times_ns": t.times_ns, "values": t.values, "sel": t.sel, "logical": t.logical,
    }
    arrays.update({f"vdd__{z}": t.vdd[z] for z in t.vdd})
    arrays.update({f"vcap__{a}": t.v_cap[a] for a in t.v_cap})
    arrays.update({f"fired__{a}": t.fired[a] for a in t.fired})
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_trace(path: str | Path) -> Trace:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        if meta.get("format") != _TRACE_FORMAT:
            raise ValueError(f"unsupported trace format {meta.get('format')!r}")
        return Trace(
            recorded=tuple(meta["recorded"]),
            times_ns=z["times_ns"],
            values=z["values"],
            vdd={zn: z[f"vdd__{zn}"] for zn in meta["zones"]},
            sel=z["sel"],
            logical=z["logical"],
            v_cap={a: z[f"vcap__{a}"] for a in meta["ahts"]},
            fired={a: z[f"fired__{a}"] for a in meta["ahts"]},
            trigger_events=[TriggerEvent(int(tn), a) for tn, a in meta["events"]],
            vdd_edges=[(int(te), zn, bool(on)) for te, zn, on in meta["vdd_edges"]],
            clock_period_ns=int(meta["clock_period_ns"]),
            horizon_ns=int(meta["horizon_ns"]),
        )


_PRAGMA = "# @aht "


def instrumented_to_bench(inst) -> str:
    """Bench text of the host netlist with one ``# @aht {json}`` line per trigger."""
    from dataclasses import asdict

    from .netlist import serialize_bench

    n = inst.netlist
    lines = []
    for a in inst.ahts:
        doc = {
            "name": a.name,
            "victim": n.net_names[a.victim_net],
            "payload": n.net_names[a.payload_net],
            "payload_kind": a.payload_kind.value,
            "v_init": a.state.v_cap,
            "params": asdict(a.params),
        }
        lines.append(_PRAGMA + json.dumps(doc, sort_keys=True))
    text = serialize_bench(n)
    head, _, rest = text.partition("\n")
    return "\n".join([head, *lines, rest]) if lines else text


def parse_instrumented(text: str, name: str = ""):
    """Inverse of :func:`instrumented_to_bench`. Plain bench text yields no triggers."""
    from .aht import InstrumentedNetlist, TriggerParams, attach, inject_aht
    from .netlist import parse_bench

    n = parse_bench(text, name)
    inst = InstrumentedNetlist(n, ())
    for line in text.splitlines():
        if line.startswith(_PRAGMA):
            doc = json.loads(line[len(_PRAGMA):])
            a = attach(n, doc["victim"], doc["payload"], TriggerParams(**doc["params"]),
                       doc.get("payload_kind", "XOR_FLIP"), doc.get("name", "aht0"), doc.get("v_init", 0.0))
            inst = inject_aht(inst, a)
    return inst


def load_instrumented(path: str | Path):
    path = Path(path)
    return parse_instrumented(path.read_text(), path.stem)
