"""Lambda-based area of the supply-gating hardware and its overhead on a benchmark.

Areas are in lambda squared. Combinational gates are normalised to NAND
equivalents; flip-flops use their own cell area.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .netlist import GateKind, Netlist

__all__ = [
    "CellAreaModel",
    "OverheadReport",
    "DEFAULT_MITIGATION_CELLS",
    "NAND_AREA",
    "DFF_AREA",
    "MUX2_AREA",
    "mitigation_area",
    "benchmark_area",
    "overhead_percent",
    "overhead_report",
    "external_report",
]

NAND_AREA = 40 * 32
DFF_AREA = 80 * 48
MUX2_AREA = 4 * NAND_AREA

# Two select multiplexers and seven flip-flops (counter, state bit, save registers).
DEFAULT_MITIGATION_CELLS: Mapping[str, int] = MappingProxyType({"MUX2": 2, "DFF": 7})

_MUX2_NOTE = "MUX2 area assumed as 4 NAND equivalents (no mux area is published)"


def _default_equivalence() -> dict[str, float]:
    eq = {k.value: 1.0 for k in GateKind if k not in (GateKind.DFF, GateKind.MUX2)}
    eq["MUX2"] = MUX2_AREA / NAND_AREA
    return eq


@dataclass(frozen=True)
class CellAreaModel:
    """Cell areas. ``nand_equivalents`` maps combinational kinds to NAND multiples."""

    nand_area: float = NAND_AREA
    dff_area: float = DFF_AREA
    nand_equivalents: Mapping[str, float] = field(default_factory=_default_equivalence)

    def __post_init__(self):
        if not (self.nand_area > 0 and self.dff_area > 0):
            raise ValueError("cell areas must be positive")
        eq = {str(getattr(k, "value", k)).upper(): float(v) for k, v in self.nand_equivalents.items()}
        bad = [k for k, v in eq.items() if not v > 0]
        if bad:
            raise ValueError(f"NAND equivalents must be positive: {bad}")
        object.__setattr__(self, "nand_equivalents", MappingProxyType(eq))

    def area(self, kind: str | GateKind) -> float:
        k = str(getattr(kind, "value", kind)).upper()
        if k == "BUFF":
            k = "BUF"
        if k == "DFF":
            return self.dff_area
        if k not in self.nand_equivalents:
            raise KeyError(f"no area for cell kind {k!r}")
        return self.nand_equivalents[k] * self.nand_area


def mitigation_area(model: CellAreaModel | None = None, cells: Mapping[str, int] | None = None) -> float:
    model = model or CellAreaModel()
    cells = DEFAULT_MITIGATION_CELLS if cells is None else cells
    total = 0.0
    for kind, count in cells.items():
        if count < 0:
            raise ValueError(f"negative count for {kind!r}")
        total += count * model.area(kind)
    return total


def benchmark_area(n: Netlist, model: CellAreaModel | None = None) -> float:
    model = model or CellAreaModel()
    return float(sum(model.area(g.kind) for g in n.gates))


def overhead_percent(mitigation: float, benchmark: float) -> float:
    """``100 * mitigation / benchmark``; the areas may come from any source."""
    if benchmark <= 0:
        raise ValueError("benchmark area must be positive")
    if mitigation < 0:
        raise ValueError("mitigation area must be nonnegative")
    return 100.0 * mitigation / benchmark


@dataclass(frozen=True)
class OverheadReport:
    benchmark: str
    gate_count: int
    benchmark_area: float
    mitigation_area: float
    overhead_percent: float
    mitigation_cells: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_MITIGATION_CELLS))
    notes: tuple[str, ...] = (_MUX2_NOTE,)
    unit: str = "lambda^2"

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "gate_count": self.gate_count,
            "benchmark_area": self.benchmark_area,
            "mitigation_area": self.mitigation_area,
            "area_unit": self.unit,
            "overhead_percent": round(self.overhead_percent, 6),
            "mitigation_cells": dict(sorted(self.mitigation_cells.items())),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def table(reports) -> str:
        """Aligned text table: benchmark, gates, area, overhead."""
        rows = [("Benchmark", "Gates", "Area", "Area Overhead (%)")]
        for r in reports:
            gates = str(r.gate_count) if r.gate_count else "-"
            rows.append((r.benchmark, gates, f"{r.benchmark_area:g}", f"{r.overhead_percent:.2f}"))
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
                 for row in rows]
        notes = sorted({n for r in reports for n in r.notes})
        return "\n".join(lines + [f"* {n}" for n in notes]) + "\n"


def overhead_report(n: Netlist, model: CellAreaModel | None = None,
                    cells: Mapping[str, int] | None = None,
                    external_area: float | None = None) -> OverheadReport:
    """Overhead of the mitigation cells on *n*, or on *external_area* if given."""
    model = model or CellAreaModel()
    cells = dict(DEFAULT_MITIGATION_CELLS if cells is None else cells)
    mit = mitigation_area(model, cells)
    area = benchmark_area(n, model) if external_area is None else float(external_area)
    notes = (_MUX2_NOTE,) if cells.get("MUX2", 0) else ()
    return OverheadReport(n.name, len(n.gates), area, mit, overhead_percent(mit, area), cells, notes)


def external_report(name: str, benchmark: float, mitigation: float) -> OverheadReport:
    """Row arithmetic on areas taken from elsewhere (unit is whatever the source used)."""
    return OverheadReport(name, 0, float(benchmark), float(mitigation), overhead_percent(mitigation, benchmark),
                          {}, (), "external")
