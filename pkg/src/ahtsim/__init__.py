"""Behavioral simulation of charge-accumulation analog Trojans and supply duty-cycling defenses."""

__version__ = "0.1.0"

from .aht import AhtInstance, PayloadKind, TriggerParams, attach, default_params, inject_aht
from .logic import LogicValue
from .logicsim import Stimulus, Trace, run, wrap_outputs
from .netlist import GateKind, Netlist, Zone, load_bench, load_benchmark, parse_bench, serialize_bench
from .premarket import CalibrationConfig, DutyCycleCalibrator, Verdict, calibrate
from .vddctl import VddSchedule, critical_duty, schedule_from_duty

__all__ = [
    "AhtInstance",
    "CalibrationConfig",
    "DutyCycleCalibrator",
    "GateKind",
    "LogicValue",
    "Netlist",
    "PayloadKind",
    "Stimulus",
    "Trace",
    "TriggerParams",
    "VddSchedule",
    "Verdict",
    "Zone",
    "attach",
    "calibrate",
    "critical_duty",
    "default_params",
    "inject_aht",
    "load_bench",
    "load_benchmark",
    "parse_bench",
    "run",
    "schedule_from_duty",
    "serialize_bench",
    "wrap_outputs",
    "__version__",
]
