"""Pre-market protocol: functional test, power-profile spikes, duty calibration.

The calibrator first tests at full duty. A pass means the part looks clean.
Otherwise it walks the duty down in coarse steps until a test passes, then
walks back up in fine steps and keeps the highest passing duty.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .aht import InstrumentedNetlist
from .logicsim import Stimulus, Trace, run, saved_output_nets
from .netlist import SEL_NET, GateKind, Netlist
from .vddctl import DEFAULT_SCHED_PERIOD_NS, VddSchedule, always_on, schedule_from_duty

__all__ = [
    "PowerProfile",
    "SpikeResult",
    "SpikeDetector",
    "CalibrationConfig",
    "Verdict",
    "EvidenceRow",
    "CalibrationReport",
    "FunctionalResult",
    "DutyCycleCalibrator",
    "power_profile",
    "detect_spike",
    "functional_test",
    "calibrate",
    "performance_penalty",
    "directed_stimulus",
]

MIN_BASELINE_CYCLES = 10


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Per-cycle switching counts; entry 0 has no predecessor and is 0."""

    per_cycle_toggles: np.ndarray
    baseline_start: int = 2
    baseline_cycles: int = 64
    steady: np.ndarray | None = None

    @property
    def cycles(self) -> int:
        return len(self.per_cycle_toggles)

    @property
    def baseline(self) -> np.ndarray:
        return self.per_cycle_toggles[self.baseline_start:self.baseline_start + self.baseline_cycles]

    @property
    def mean(self) -> float:
        return float(self.baseline.mean()) if len(self.baseline) else 0.0

    @property
    def stddev(self) -> float:
        return float(self.baseline.std()) if len(self.baseline) else 0.0


def power_profile(t: Trace, baseline_cycles: int = 64, baseline_start: int = 2) -> PowerProfile:
    """Count concrete value changes between consecutive cycles.

    Every recorded net counts except the derived select line, which belongs to
    the supply controller. Each trigger output adds its own transitions. A
    change into or out of X is not counted: an unpowered node does not switch.

    The baseline window skips the first two cycles, where the state-saving
    registers load their first real values out of reset. ``steady`` marks
    cycles that were powered together with their predecessor.
    """
    cols = [j for j, name in enumerate(t.recorded) if name != SEL_NET]
    toggles = np.zeros(len(t), dtype=np.int64)
    if len(t) > 1:
        v = t.values[:, cols]
        prev, cur = v[:-1], v[1:]
        toggles[1:] = ((prev != cur) & (prev != 2) & (cur != 2)).sum(axis=1)
        for f in t.fired.values():
            toggles[1:] += (f[1:] != f[:-1])
    sel = np.asarray(t.sel, dtype=bool)
    steady = sel.copy()
    if len(steady):
        steady[0] = False
        steady[1:] &= sel[:-1]
    return PowerProfile(toggles, baseline_start, baseline_cycles, steady)


SPIKE_DIRECTIONS = ("change", "increase")


class SpikeDetector(BaseEstimator):
    """Mean + k*stddev outlier rule on per-cycle toggle counts.

    ``fit`` learns the statistics of a baseline window of a profile;
    ``predict`` flags cycles above ``mean_ + spike_factor * std_``. With
    ``direction="change"`` it also flags steady cycles that fall the same
    distance below the mean: a payload that flips an actively switching net
    can silence its fanout cone. Cycles before the window are warm-up and
    never flagged.
    """

    def __init__(self, spike_factor: float = 6.0, baseline_cycles: int = 64, baseline_start: int = 2,
                 direction: str = "change"):
        self.spike_factor = spike_factor
        self.baseline_cycles = baseline_cycles
        self.baseline_start = baseline_start
        self.direction = direction

    def _window(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).ravel()
        w = X[self.baseline_start:self.baseline_start + self.baseline_cycles]
        if len(w) < MIN_BASELINE_CYCLES:
            raise ValueError(f"baseline window has {len(w)} cycles, need at least {MIN_BASELINE_CYCLES}")
        return w

    def fit(self, X, y=None):
        if self.spike_factor <= 0:
            raise ValueError("spike_factor must be positive")
        if self.direction not in SPIKE_DIRECTIONS:
            raise ValueError(f"direction must be one of {SPIKE_DIRECTIONS}")
        w = self._window(X)
        self.mean_ = float(w.mean())
        self.std_ = float(w.std())
        self.threshold_ = self.mean_ + self.spike_factor * self.std_
        self.low_threshold_ = self.mean_ - self.spike_factor * self.std_
        return self

    def predict(self, X, steady=None) -> np.ndarray:
        """Boolean flag per cycle. *steady* limits low-side flags (default: all cycles)."""
        check_is_fitted(self, "threshold_")
        x = np.asarray(X, dtype=np.float64).ravel()
        flags = x > self.threshold_
        if self.direction == "change":
            low = x < self.low_threshold_
            if steady is not None:
                low &= np.asarray(steady, dtype=bool)
            flags |= low
        flags[:self.baseline_start] = False
        return flags


@dataclass(frozen=True)
class SpikeResult:
    flagged_cycles: tuple[int, ...] = ()

    @property
    def clear(self) -> bool:
        return not self.flagged_cycles

    @property
    def first(self) -> int | None:
        return self.flagged_cycles[0] if self.flagged_cycles else None


@dataclass(frozen=True)
class CalibrationConfig:
    coarse_step: float = 0.10
    fine_step: float = 0.05
    min_duty: float = 0.50
    vectors: Stimulus | None = None
    spike_factor: float = 6.0
    horizon_multiplier: float = 10.0
    trigger_time_bound_ns: int = 2000
    sched_period_ns: int = DEFAULT_SCHED_PERIOD_NS
    phase_ns: int = 0
    clock_period_ns: int = 10
    baseline_cycles: int = 64
    golden_mode: bool = False
    spike_direction: str = "change"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fine_step <= self.coarse_step < 1:
            raise ValueError("need 0 < fine_step <= coarse_step < 1")
        if not 0 < self.min_duty < 1:
            raise ValueError("min_duty must lie in (0, 1)")
        ratio = self.coarse_step / self.fine_step
        if abs(ratio - round(ratio)) > 1e-9 or abs(1 / self.fine_step - round(1 / self.fine_step)) > 1e-9:
            raise ValueError("coarse_step and 1.0 must be whole multiples of fine_step")
        if self.spike_factor <= 0 or self.horizon_multiplier <= 0 or self.trigger_time_bound_ns <= 0:
            raise ValueError("spike_factor, horizon_multiplier and trigger_time_bound_ns must be positive")
        if self.baseline_cycles < MIN_BASELINE_CYCLES:
            raise ValueError(f"baseline_cycles must be at least {MIN_BASELINE_CYCLES}")
        if self.spike_direction not in SPIKE_DIRECTIONS:
            raise ValueError(f"spike_direction must be one of {SPIKE_DIRECTIONS}")

    @property
    def horizon_ns(self) -> int:
        raw = int(math.ceil(self.horizon_multiplier * self.trigger_time_bound_ns))
        return -(-raw // self.clock_period_ns) * self.clock_period_ns

    def detector(self) -> SpikeDetector:
        return SpikeDetector(self.spike_factor, self.baseline_cycles, direction=self.spike_direction)


def detect_spike(p: PowerProfile, cfg: CalibrationConfig | None = None,
                 baseline: PowerProfile | None = None) -> SpikeResult:
    """Golden-free by default; with *baseline*, compare cycle by cycle."""
    cfg = cfg or CalibrationConfig()
    if p.cycles == 0:
        raise ValueError("empty power profile")
    det = SpikeDetector(cfg.spike_factor, p.baseline_cycles, p.baseline_start, cfg.spike_direction)
    if baseline is None:
        flags = det.fit(p.per_cycle_toggles).predict(p.per_cycle_toggles, p.steady)
    else:
        det.fit(baseline.per_cycle_toggles)
        m = min(p.cycles, baseline.cycles)
        excess = p.per_cycle_toggles[:m] - baseline.per_cycle_toggles[:m]
        bound = cfg.spike_factor * det.std_
        flags = excess > bound
        if cfg.spike_direction == "change":
            low = excess < -bound
            if p.steady is not None:
                low &= p.steady[:m]
            flags |= low
        flags[:p.baseline_start] = False
    return SpikeResult(tuple(int(c) for c in np.flatnonzero(flags)))


def performance_penalty(duty: float) -> float:
    if not 0 < duty <= 1:
        raise ValueError("duty must lie in (0, 1]")
    return round(1.0 - duty, 12)


# ---------------------------------------------------------------------------
# functional test


@dataclass(frozen=True)
class FunctionalResult:
    passed: bool
    first_mismatch_cycle: int | None = None
    first_mismatch_time_ns: int | None = None
    logical_cycle: int | None = None
    net: str | None = None
    spike: SpikeResult = field(default_factory=SpikeResult)
    compared_cycles: int = 0


def _unwrap(x) -> tuple[Netlist, tuple]:
    return (x.netlist, x.ahts) if isinstance(x, InstrumentedNetlist) else (x, ())


def _logical_outputs(t: Trace, n: Netlist) -> tuple[np.ndarray, np.ndarray]:
    """Output values per logical cycle and the physical cycle each came from."""
    registered = set(saved_output_nets(n))
    idx = np.flatnonzero(t.sel)
    cols = []
    for o in n.outputs:
        j = t.recorded.index(o)
        if o in registered:
            # visible after the closing edge of the powered cycle
            keep = idx[idx + 1 < len(t)]
            cols.append(t.values[keep + 1, j])
        else:
            cols.append(t.values[idx, j])
    m = min(len(c) for c in cols) if cols else 0
    return np.stack([c[:m] for c in cols], axis=1) if cols else np.zeros((0, 0), np.int8), idx[:m]


def directed_stimulus(n: Netlist, victim: str, cycles: int, seed: int = 0, clock_period_ns: int = 10,
                      tries: int = 256) -> Stimulus:
    """Random background vector with one input bit flipping so *victim* toggles every cycle."""
    from .logicsim import init_state

    rng = np.random.default_rng(seed)
    k = len(n.inputs)
    for _ in range(tries):
        base = rng.integers(0, 2, size=k, dtype=np.uint8)
        ref = init_state(n, inputs=list(base)).value(victim)
        for bit in rng.permutation(k):
            alt = base.copy()
            alt[bit] ^= 1
            if init_state(n, inputs=list(alt)).value(victim) != ref:
                return Stimulus.repeat([base, alt], cycles, clock_period_ns)
    raise ValueError(f"no single-bit input flip found that toggles {victim!r}")


def _default_vectors(instrumented, cfg: CalibrationConfig) -> Stimulus:
    n, ahts = _unwrap(instrumented)
    cycles = cfg.horizon_ns // cfg.clock_period_ns + 1
    if ahts:
        return directed_stimulus(n, n.net_names[ahts[0].victim_net], cycles, cfg.seed, cfg.clock_period_ns)
    return Stimulus.random(n, cycles, cfg.seed, cfg.clock_period_ns)


def functional_test(
    instrumented,
    golden,
    s: Stimulus,
    sched: VddSchedule | None = None,
    cfg: CalibrationConfig | None = None,
) -> FunctionalResult:
    """Compare saved outputs at powered cycles against a full-duty golden run.

    Passes only with zero mismatches and a clear spike check.
    """
    cfg = cfg or CalibrationConfig()
    n_i, _ = _unwrap(instrumented)
    n_g, _ = _unwrap(golden)
    if n_i.inputs != n_g.inputs or n_i.outputs != n_g.outputs:
        raise ValueError("instrumented and golden netlists expose different interfaces")
    horizon = cfg.horizon_ns
    sched = sched or always_on()
    if sched.horizon_ns is None:
        sched = VddSchedule(sched.period_ns, sched.duty, sched.phase_ns, horizon)
    ti = run(instrumented, s, sched, horizon_ns=horizon)
    tg = run(golden, s, always_on(horizon), horizon_ns=horizon)
    oi, phys = _logical_outputs(ti, n_i)
    og, _ = _logical_outputs(tg, n_g)
    m = min(len(oi), len(og))
    prof = power_profile(ti, cfg.baseline_cycles)
    base = power_profile(tg, cfg.baseline_cycles) if cfg.golden_mode else None
    spike = detect_spike(prof, cfg, base)
    diff = np.flatnonzero((oi[:m] != og[:m]).any(axis=1))
    if len(diff):
        k = int(diff[0])
        j = int(np.flatnonzero(oi[k] != og[k])[0])
        c = int(phys[k])
        return FunctionalResult(False, c, c * s.clock_period_ns, k, n_i.outputs[j], spike, m)
    return FunctionalResult(spike.clear, None, None, None, None, spike, m)


# ---------------------------------------------------------------------------
# calibration


class Verdict(str, enum.Enum):
    CLEAN = "CLEAN"
    TROJAN_MITIGATED = "TROJAN_MITIGATED"
    UNUSABLE = "UNUSABLE"


@dataclass(frozen=True)
class EvidenceRow:
    duty: float
    passed: bool
    first_failure_ns: int | None
    spike: bool
    phase: str


@dataclass(frozen=True)
class CalibrationReport:
    verdict: Verdict
    chosen_duty: float | None
    performance_penalty: float | None
    evidence: tuple[EvidenceRow, ...]
    config: dict = field(default_factory=dict)

    SCHEMA_VERSION = 1

    def to_dict(self) -> dict:
        return {
            "schema_version": self.SCHEMA_VERSION,
            "verdict": self.verdict.value,
            "chosen_duty": self.chosen_duty,
            "performance_penalty": self.performance_penalty,
            "evidence": [asdict(e) for e in self.evidence],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        lines = [f"verdict: {self.verdict.value}",
                 f"chosen duty: {'-' if self.chosen_duty is None else f'{self.chosen_duty:.2f}'}",
                 f"performance penalty: {'-' if self.performance_penalty is None else f'{self.performance_penalty:.2f}'}",
                 "",
                 f"{'phase':<7} {'duty':>5} {'result':<6} {'first failure (ns)':>18} {'spike':<5}"]
        for e in self.evidence:
            ff = "-" if e.first_failure_ns is None else str(e.first_failure_ns)
            lines.append(f"{e.phase:<7} {e.duty:>5.2f} {'pass' if e.passed else 'fail':<6} {ff:>18} "
                         f"{'yes' if e.spike else 'no':<5}")
        return "\n".join(lines) + "\n"


def _grid(cfg: CalibrationConfig):
    per_unit = round(1 / cfg.fine_step)
    per_coarse = round(cfg.coarse_step / cfg.fine_step)
    return per_unit, per_coarse, lambda i: round(i / per_unit, 12)


def calibrate(instrumented, golden, cfg: CalibrationConfig | None = None) -> CalibrationReport:
    cfg = cfg or CalibrationConfig()
    stim = cfg.vectors if cfg.vectors is not None else _default_vectors(instrumented, cfg)
    per_unit, per_coarse, duty_of = _grid(cfg)
    evidence: list[EvidenceRow] = []

    def test(i: int, phase: str) -> bool:
        d = duty_of(i)
        sched = schedule_from_duty(cfg.sched_period_ns, d, cfg.phase_ns, cfg.horizon_ns, cfg.clock_period_ns)
        r = functional_test(instrumented, golden, stim, sched, cfg)
        first = r.first_mismatch_time_ns
        if first is None and not r.spike.clear:
            first = r.spike.first * stim.clock_period_ns
        evidence.append(EvidenceRow(d, r.passed, first, not r.spike.clear, phase))
        return r.passed

    summary = {k: v for k, v in asdict(cfg).items() if k != "vectors"}
    summary["vector_count"] = len(stim)

    if test(per_unit, "full"):
        return CalibrationReport(Verdict.CLEAN, 1.0, 0.0, tuple(evidence), summary)
    floor = cfg.min_duty - 1e-9
    i = per_unit - per_coarse
    while duty_of(i) >= floor:
        if test(i, "coarse"):
            best = i
            j = i + 1
            while j < i + per_coarse and test(j, "fine"):
                best = j
                j += 1
            d = duty_of(best)
            return CalibrationReport(Verdict.TROJAN_MITIGATED, d, performance_penalty(d), tuple(evidence), summary)
        i -= per_coarse
    return CalibrationReport(Verdict.UNUSABLE, None, None, tuple(evidence), summary)


class DutyCycleCalibrator(BaseEstimator):
    """Estimator wrapper around :func:`calibrate`.

    ``fit(instrumented, golden)`` runs the protocol and stores ``report_``,
    ``verdict_`` and ``chosen_duty_``.
    """

    def __init__(self, coarse_step=0.10, fine_step=0.05, min_duty=0.50, spike_factor=6.0,
                 horizon_multiplier=10.0, trigger_time_bound_ns=2000, sched_period_ns=DEFAULT_SCHED_PERIOD_NS,
                 baseline_cycles=64, golden_mode=False, spike_direction="change", seed=0):
        self.coarse_step = coarse_step
        self.fine_step = fine_step
        self.min_duty = min_duty
        self.spike_factor = spike_factor
        self.horizon_multiplier = horizon_multiplier
        self.trigger_time_bound_ns = trigger_time_bound_ns
        self.sched_period_ns = sched_period_ns
        self.baseline_cycles = baseline_cycles
        self.golden_mode = golden_mode
        self.spike_direction = spike_direction
        self.seed = seed

    def config(self, vectors: Stimulus | None = None) -> CalibrationConfig:
        return CalibrationConfig(vectors=vectors, **self.get_params())

    def fit(self, instrumented, golden, vectors: Stimulus | None = None):
        self.report_ = calibrate(instrumented, golden, self.config(vectors))
        self.verdict_ = self.report_.verdict
        self.chosen_duty_ = self.report_.chosen_duty
        return self
