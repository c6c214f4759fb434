"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 netlist parse error,
4 simulation error. Failures print one line to stderr of the form
``ahtsim: error code=<n> kind=<kind>: <message>``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .aht import InstrumentedNetlist, UnknownNetError, attach, inject_aht, precharge_for_cut
from .config import ConfigError, RunConfig, load_config
from .export import (
    instrumented_to_bench,
    load_trace,
    parse_instrumented,
    save_trace,
    write_csv,
    write_vcd,
)
from .logicsim import SimulationError, Stimulus, run, wrap_outputs
from .netlist import NetlistError, bundled_benchmarks, load_benchmark, netlist_stats, serialize_bench
from .overhead import OverheadReport, external_report, mitigation_area, overhead_percent, overhead_report
from .premarket import CalibrationConfig, calibrate, directed_stimulus
from .vddctl import ScheduleError, schedule_from_duty

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_SIM = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _read_bench(ref: str, base: Path | None = None) -> InstrumentedNetlist:
    if ref in bundled_benchmarks():
        return InstrumentedNetlist(load_benchmark(ref), ())
    path = Path(ref) if base is None or Path(ref).is_absolute() else base / ref
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(EXIT_CONFIG, "config", f"cannot read netlist {path}: {exc}") from exc
    return parse_instrumented(text, path.stem)


def _apply_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Fold command-line flags into the config (flags win)."""
    data = cfg.model_dump()
    data["base_dir"] = cfg.base_dir
    if kw.get("seed") is not None:
        if data.get("stimulus") is not None:
            data["stimulus"]["seed"] = kw["seed"]
        data["calibration"]["seed"] = kw["seed"]
    for key, dest in (("duty", "duty"), ("period_ns", "period_ns")):
        if kw.get(key) is not None:
            data["schedule"][dest] = kw[key]
    if kw.get("horizon_ns") is not None:
        data["horizon_ns"] = kw["horizon_ns"]
    for key in ("min_duty", "coarse_step", "fine_step"):
        if kw.get(key) is not None:
            data["calibration"][key] = kw[key]
    if kw.get("victim") or kw.get("payload") or kw.get("fortified") is not None:
        aht = data["aht"] or {}
        for key in ("victim", "payload"):
            if kw.get(key):
                aht[key] = kw[key]
        if kw.get("fortified") is not None:
            aht["fortified"] = kw["fortified"]
        data["aht"] = aht
    try:
        return RunConfig(**data)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def _by_name(inst: InstrumentedNetlist) -> list[tuple]:
    names = inst.netlist.net_names
    return [(names[a.victim_net], names[a.payload_net], a.params, a.payload_kind, a.name, a.state.v_cap)
            for a in inst.ahts]


def _build(cfg: RunConfig, force_wrap: bool = False) -> tuple[InstrumentedNetlist, object]:
    """Instrumented netlist plus the golden host it was built from."""
    inst = _read_bench(cfg.netlist, Path(cfg.base_dir) if cfg.base_dir else None)
    host = inst.netlist
    if cfg.wrap_outputs or force_wrap:
        # Wrapping renumbers nets, so re-attach any pragma triggers by name.
        specs = _by_name(inst)
        host = wrap_outputs(host)
        inst = InstrumentedNetlist(host, ())
        for spec in specs:
            inst = inject_aht(inst, attach(host, *spec))
    if cfg.aht is not None:
        p = cfg.aht.params()
        v0 = precharge_for_cut(p, cfg.aht.precharge_cut_ns, cfg.clock_period_ns) if cfg.aht.precharge_cut_ns \
            else cfg.aht.v_init
        a = attach(host, cfg.aht.victim, cfg.aht.payload, p, cfg.aht.payload_kind, cfg.aht.name, v0)
        inst = inject_aht(inst, a)
    return inst, host


def _stimulus(cfg: RunConfig, inst: InstrumentedNetlist) -> Stimulus:
    s, n, T = cfg.stimulus, inst.netlist, cfg.clock_period_ns
    if s is None:
        raise ConfigError("the config has no 'stimulus' section")
    if s.kind == "random":
        return Stimulus.random(n, s.cycles, s.seed, T)
    if s.kind == "directed":
        if not inst.ahts:
            raise ConfigError("directed stimulus needs an attached trigger")
        return directed_stimulus(n, n.net_names[inst.ahts[0].victim_net], s.cycles, s.seed, T)
    if s.kind == "alternating":
        if s.net not in n.inputs:
            raise ConfigError(f"alternating net {s.net!r} is not a primary input")
        return Stimulus.alternating(n, s.net, s.cycles, T)
    if s.kind == "constant":
        return Stimulus.constant(n, s.cycles, s.value, T)
    rows = [ln.strip() for ln in cfg.path(s.path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        vec = np.array([[int(ch) for ch in r] for r in rows], dtype=np.uint8)
    except ValueError as exc:
        raise ConfigError(f"vector file {s.path}: {exc}") from exc
    if vec.ndim != 2 or vec.shape[1] != len(n.inputs) or vec.max(initial=0) > 1:
        raise ConfigError(f"vector file {s.path}: need rows of {len(n.inputs)} binary digits")
    return Stimulus(vec, T)


def _simulate(cfg: RunConfig):
    inst, _ = _build(cfg)
    stim = _stimulus(cfg, inst)
    sc = cfg.schedule
    sched = schedule_from_duty(sc.period_ns, sc.duty, sc.phase_ns, cfg.horizon_ns, cfg.clock_period_ns)
    return run(inst, stim, sched, horizon_ns=cfg.horizon_ns)


def _summary(t) -> dict:
    return {
        "cycles": len(t),
        "horizon_ns": int(t.horizon_ns),
        "stall_fraction": round(t.stall_fraction, 12),
        "trigger_events": [{"time_ns": e.time_ns, "aht": e.aht} for e in t.trigger_events],
        "vdd_edges": [{"time_ns": te, "zone": z, "on": on} for te, z, on in t.vdd_edges],
    }


def _dump(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, newline="\n")


@click.group()
@click.version_option(__version__, prog_name="ahtsim")
def cli():
    """Analog trigger simulation, duty-cycled mitigation and pre-market calibration."""


@cli.command("parse")
@click.argument("path")
@click.option("--json", "as_json", is_flag=True, help="Print statistics as JSON.")
@click.option("--emit", type=click.Path(dir_okay=False), help="Also write the canonical .bench text here.")
def cmd_parse(path, as_json, emit):
    """Parse a .bench file (or bundled benchmark name) and print its statistics."""
    inst = _read_bench(path)
    stats = netlist_stats(inst.netlist)
    if as_json:
        click.echo(json.dumps({"name": inst.netlist.name, **stats}, sort_keys=True))
    else:
        click.echo(inst.netlist.name)
        for k, v in stats.items():
            click.echo(f"  {k:<12} {v}")
    if emit:
        _dump(Path(emit), serialize_bench(inst.netlist))


_shared = [
    click.option("--seed", type=int, help="Override the stimulus / calibration seed."),
    click.option("--victim", help="Victim net of the trigger."),
    click.option("--payload", help="Payload net of the trigger."),
    click.option("--fortified/--baseline", default=None, help="Use the fortified trigger model."),
    click.option("--period-ns", type=int, help="Supply schedule period."),
]


def _with(options):
    def deco(f):
        for opt in reversed(options):
            f = opt(f)
        return f
    return deco


@cli.command("simulate")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@_with(_shared)
@click.option("--duty", type=float, help="Supply duty cycle in (0, 1].")
@click.option("--horizon-ns", type=int, help="Simulation horizon.")
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
def cmd_simulate(config, out_dir, **kw):
    """Run one simulation; write trace.npz, trace.vcd, trace.csv and summary.json."""
    cfg = _apply_overrides(load_config(config), **kw)
    t = _simulate(cfg)
    out = Path(out_dir) if out_dir else cfg.path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.output.npz:
        save_trace(t, out / "trace.npz")
    if cfg.output.vcd:
        write_vcd(t, out / "trace.vcd")
    if cfg.output.csv:
        write_csv(t, out / "trace.csv")
    summary = _summary(t)
    _dump(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    click.echo(f"{len(t)} cycles, {len(t.trigger_events)} trigger event(s) -> {out}")
    for e in t.trigger_events:
        click.echo(f"  trigger {e.aht} at {e.time_ns} ns")


@cli.command("inject")
@click.argument("source")
@click.option("--victim", help="Victim net (overrides the config).")
@click.option("--payload", help="Payload net (overrides the config).")
@click.option("--fortified/--baseline", default=None)
@click.option("--payload-kind", type=click.Choice(["XOR_FLIP", "FORCE_ONE", "FORCE_ZERO"]), default=None)
@click.option("-o", "--out", "out_path", type=click.Path(dir_okay=False), required=True)
def cmd_inject(source, victim, payload, fortified, payload_kind, out_path):
    """Attach a trigger and write the bench with ``# @aht`` pragma lines.

    SOURCE is a run config (.yaml/.yml) or a netlist; with a netlist,
    --victim and --payload are required.
    """
    if source.endswith((".yaml", ".yml")):
        cfg = _apply_overrides(load_config(source), victim=victim, payload=payload, fortified=fortified)
        if payload_kind:
            cfg = cfg.model_copy(update={"aht": cfg.aht.model_copy(update={"payload_kind": payload_kind})})
    else:
        if not (victim and payload):
            raise ConfigError("--victim and --payload are required with a netlist source")
        aht = {"victim": victim, "payload": payload, "fortified": bool(fortified)}
        if payload_kind:
            aht["payload_kind"] = payload_kind
        cfg = RunConfig(schema_version=1, netlist=str(Path(source).resolve()) if Path(source).exists() else source,
                        aht=aht)
    if cfg.aht is None:
        raise ConfigError("no trigger given (config 'aht' section or --victim/--payload)")
    inst, _ = _build(cfg)
    _dump(Path(out_path), instrumented_to_bench(inst))
    click.echo(f"wrote {out_path} ({len(inst.ahts)} trigger(s))")


@cli.command("calibrate")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@_with(_shared)
@click.option("--min-duty", type=float)
@click.option("--coarse-step", type=float)
@click.option("--fine-step", type=float)
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
def cmd_calibrate(config, out_dir, **kw):
    """Full-duty test, then coarse/fine duty sweep; write report.json and report.txt.

    Outputs are always wrapped with the state-saving hardware before testing.
    Without a stimulus section the vectors default to the directed pattern
    that keeps the victim toggling (or random vectors with no trigger).
    """
    cfg = _apply_overrides(load_config(config), **kw)
    inst, golden = _build(cfg, force_wrap=True)
    c = cfg.calibration
    vectors = _stimulus(cfg, inst) if cfg.stimulus is not None else None
    ccfg = CalibrationConfig(
        coarse_step=c.coarse_step, fine_step=c.fine_step, min_duty=c.min_duty, vectors=vectors,
        spike_factor=c.spike_factor, horizon_multiplier=c.horizon_multiplier,
        trigger_time_bound_ns=c.trigger_time_bound_ns, sched_period_ns=cfg.schedule.period_ns,
        phase_ns=cfg.schedule.phase_ns, clock_period_ns=cfg.clock_period_ns, baseline_cycles=c.baseline_cycles,
        golden_mode=c.golden_mode, spike_direction=c.spike_direction, seed=c.seed,
    )
    report = calibrate(inst, golden, ccfg)
    out = Path(out_dir) if out_dir else cfg.path(cfg.output.dir)
    _dump(out / "report.json", report.to_json())
    _dump(out / "report.txt", report.to_table())
    click.echo(report.to_table(), nl=False)


@cli.command("overhead")
@click.argument("benches", nargs=-1)
@click.option("--area", "areas", multiple=True, metavar="NAME=AREA[:MITIGATION]",
              help="Externally supplied benchmark area, optionally with its own mitigation area.")
@click.option("--mitigation-area", "mit", type=float,
              help="Mitigation area in the unit of --area (default: computed, lambda^2).")
@click.option("--json-out", type=click.Path(dir_okay=False), help="Write the reports as JSON here.")
def cmd_overhead(benches, areas, mit, json_out):
    """Area overhead of the mitigation cells on each benchmark."""
    reports = [overhead_report(_read_bench(b).netlist) for b in benches]
    for spec in areas:
        name, sep, value = spec.partition("=")
        area_s, _, mit_s = value.partition(":")
        try:
            area = float(area_s)
            m = float(mit_s) if mit_s else (mitigation_area() if mit is None else mit)
        except ValueError:
            area = m = -1.0
        if not sep or not name or area <= 0 or m < 0:
            raise ConfigError(f"--area expects NAME=AREA[:MITIGATION] with positive numbers, got {spec!r}")
        reports.append(external_report(name, area, m) if mit_s or mit is not None
                       else OverheadReport(name, 0, area, m, overhead_percent(m, area)))
    reports.sort(key=lambda r: r.benchmark_area)
    click.echo(OverheadReport.table(reports), nl=False)
    if json_out:
        _dump(Path(json_out), json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")


@cli.command("export-vcd")
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", "out_path", type=click.Path(dir_okay=False), required=True)
def cmd_export_vcd(trace, out_path):
    """Convert a saved trace (.npz) to VCD."""
    try:
        t = load_trace(trace)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load trace {trace}: {exc}") from exc
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_vcd(t, out_path)
    click.echo(f"wrote {out_path}")


def _classify(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, CliError):
        return exc.code, exc.kind
    if isinstance(exc, NetlistError):
        return EXIT_PARSE, "parse"
    if isinstance(exc, (ConfigError, UnknownNetError, ScheduleError, click.UsageError)):
        return EXIT_CONFIG, "config"
    if isinstance(exc, (SimulationError, ValueError, KeyError, RuntimeError)):
        return EXIT_SIM, "simulation"
    raise exc


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="ahtsim", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("ahtsim: aborted", err=True)
        return 1
    except Exception as exc:  # mapped to the documented exit codes
        code, kind = _classify(exc)
        msg = exc.format_message() if isinstance(exc, click.ClickException) else str(exc)
        msg = " | ".join(line.strip() for line in msg.splitlines() if line.strip())
        click.echo(f"ahtsim: error code={code} kind={kind}: {msg}", err=True)
        return code
    return EXIT_OK


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
