"""Versioned YAML run configuration. Unknown keys are rejected."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .aht import PayloadKind, TriggerParams, default_params
from .netlist import Netlist, bundled_benchmarks, load_bench, load_benchmark

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "RunConfig",
    "StimulusSpec",
    "TriggerSpec",
    "ScheduleSpec",
    "CalibrationSpec",
    "OutputSpec",
    "load_config",
    "resolve_netlist",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StimulusSpec(_Strict):
    kind: Literal["random", "directed", "alternating", "constant", "file"] = "random"
    seed: Optional[int] = None
    cycles: int = Field(1000, ge=1)
    net: Optional[str] = None
    value: Literal[0, 1] = 0
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind in ("random", "directed") and self.seed is None:
            raise ValueError(f"stimulus kind {self.kind!r} needs a seed")
        if self.kind == "alternating" and not self.net:
            raise ValueError("alternating stimulus needs 'net'")
        if self.kind == "file" and not self.path:
            raise ValueError("file stimulus needs 'path'")
        return self


class TriggerSpec(_Strict):
    victim: str
    payload: str
    payload_kind: PayloadKind = PayloadKind.XOR_FLIP
    fortified: bool = False
    name: str = "aht0"
    c_unit: Optional[float] = None
    c_main: Optional[float] = None
    c_new: Optional[float] = None
    vdd_volts: Optional[float] = None
    v_threshold: Optional[float] = None
    retention_ns: Optional[float] = None
    leak_tau_ns: Optional[float] = None
    detector_gated_by_vdd: Optional[bool] = None
    v_init: float = Field(0.0, ge=0)
    precharge_cut_ns: Optional[int] = Field(None, gt=0)

    def params(self) -> TriggerParams:
        fields = ("c_unit", "c_main", "c_new", "vdd_volts", "v_threshold", "retention_ns", "leak_tau_ns",
                  "detector_gated_by_vdd")
        overrides = {f: getattr(self, f) for f in fields if getattr(self, f) is not None}
        return default_params(self.fortified, **overrides)


class ScheduleSpec(_Strict):
    period_ns: int = Field(1000, gt=0)
    duty: float = Field(1.0, gt=0, le=1)
    phase_ns: int = Field(0, ge=0)


class CalibrationSpec(_Strict):
    coarse_step: float = 0.10
    fine_step: float = 0.05
    min_duty: float = 0.50
    spike_factor: float = 6.0
    spike_direction: Literal["change", "increase"] = "change"
    horizon_multiplier: float = 10.0
    trigger_time_bound_ns: int = 2000
    baseline_cycles: int = 64
    golden_mode: bool = False
    seed: int = 0


class OutputSpec(_Strict):
    dir: str = "out"
    vcd: bool = True
    csv: bool = True
    npz: bool = True


class RunConfig(_Strict):
    schema_version: Literal[1]
    netlist: str
    wrap_outputs: bool = False
    clock_period_ns: int = Field(10, gt=0)
    horizon_ns: Optional[int] = Field(None, gt=0)
    stimulus: Optional[StimulusSpec] = None
    aht: Optional[TriggerSpec] = None
    schedule: ScheduleSpec = ScheduleSpec()
    calibration: CalibrationSpec = CalibrationSpec()
    output: OutputSpec = OutputSpec()
    base_dir: Optional[str] = Field(None, exclude=True)

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() or self.base_dir is None else Path(self.base_dir) / q


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML run config; relative paths resolve next to it."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}")
    if "base_dir" in raw:
        raise ConfigError(f"{path}: 'base_dir' is not a config key")
    try:
        return RunConfig(**raw, base_dir=str(path.parent))
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def resolve_netlist(cfg: RunConfig) -> Netlist:
    """A bundled benchmark name, or a ``.bench`` path relative to the config."""
    if cfg.netlist in bundled_benchmarks():
        return load_benchmark(cfg.netlist)
    return load_bench(cfg.path(cfg.netlist))
