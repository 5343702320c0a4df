"""Extremum-seeking resource controller run against the synthetic plant.

The controller regulates one workload's core allocation toward a setpoint
in either measured p95 latency or buoyancy. It needs no plant model: a
small sinusoidal perturbation rides on the base allocation, the error
signal is demodulated against the same sinusoid over each period to
estimate the local gradient d(error)/d(cores), and the base allocation is
nudged along -gain * error * gradient, clipped to the actuation bounds.

Error is signed so that positive always means "worse than setpoint":
latency above the setpoint, or buoyancy below it. Error and gradient are
normalized by the setpoint magnitude so one gain works in both modes, and
each update is slew-limited to twice the perturbation amplitude so the
integrator cannot slingshot across the latency knee.
"""

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .engine import Engine, EngineConfig
from .errors import ConfigError
from .model import SloSpec
from .sources import Allocation, ContentionPlant, PlantConfig

MODE_LATENCY = "latency"
MODE_BUOYANCY = "buoyancy"


@dataclass(frozen=True, slots=True)
class ControllerConfig:
    """Extremum-seeking parameters."""

    mode: str
    setpoint: float
    perturb_amplitude: float = 0.25  # cores
    perturb_period: int = 8  # windows per perturbation cycle
    gain: float = 0.5
    min_cores: float = 1.0
    max_cores: float = 8.0

    def __post_init__(self):
        if self.mode not in (MODE_LATENCY, MODE_BUOYANCY):
            raise ValueError(f"mode must be 'latency' or 'buoyancy', got {self.mode!r}")
        if self.perturb_amplitude <= 0:
            raise ValueError("perturb_amplitude must be > 0")
        if self.perturb_period < 4:
            raise ValueError("perturb_period must be >= 4")
        if not self.min_cores < self.max_cores:
            raise ValueError("actuation bounds must be ordered")


@dataclass(frozen=True, slots=True)
class InterferenceSchedule:
    """Step function of interference level over window index."""

    steps: tuple[tuple[int, float], ...]  # (window, level), sorted by window

    def level(self, window: int) -> float:
        current = 0.0
        for start, value in self.steps:
            if window >= start:
                current = value
            else:
                break
        return current

    @staticmethod
    def from_dict(obj: dict) -> "InterferenceSchedule":
        try:
            steps = tuple(
                sorted((int(s["window"]), float(s["level"])) for s in obj["steps"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"schedule: {exc}") from None
        return InterferenceSchedule(steps=steps)

    @staticmethod
    def from_file(path: str) -> "InterferenceSchedule":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return InterferenceSchedule.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read schedule {path!r}: {exc}") from None


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """What to drive: the workload, its load, and the experiment shape."""

    workload_id: str
    load_rps: float
    initial_cores: float
    llc_alloc_kib: Optional[float] = None
    windows: int = 260
    repetitions: int = 10
    slo: Optional[SloSpec] = None
    node_cores: Optional[float] = None  # default: plant total_cores
    alpha: float = 0.7


@dataclass(frozen=True, slots=True)
class ControlRecord:
    """One emitted window of the closed loop."""

    window: int
    seed: int
    cores: float
    p95_ms: float
    buoyancy: float
    setpoint: float
    mode: str


@dataclass
class ExtremumSeeker:
    """One-dimensional perturbation-correlation extremum seeker."""

    config: ControllerConfig
    base: float
    _phase_index: int = 0
    _demod_sum: float = 0.0
    _error_sum: float = 0.0
    _applied: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.base = self._clip_base(self.base)

    def _clip_base(self, value: float) -> float:
        cfg = self.config
        lo = cfg.min_cores + cfg.perturb_amplitude
        hi = cfg.max_cores - cfg.perturb_amplitude
        if lo > hi:  # bounds narrower than the perturbation: pin to the middle
            return (cfg.min_cores + cfg.max_cores) / 2.0
        return min(max(value, lo), hi)

    def _sin(self) -> float:
        return math.sin(2.0 * math.pi * self._phase_index / self.config.perturb_period)

    def next_allocation(self) -> float:
        """Cores to apply this window (base plus perturbation, in bounds)."""
        cfg = self.config
        raw = self.base + cfg.perturb_amplitude * self._sin()
        self._applied = min(max(raw, cfg.min_cores), cfg.max_cores)
        return self._applied

    def observe(self, measured: float):
        """Feed this window's measurement; updates base once per period."""
        cfg = self.config
        scale = max(abs(cfg.setpoint), 1e-9)
        if cfg.mode == MODE_LATENCY:
            error = (measured - cfg.setpoint) / scale
        else:
            error = (cfg.setpoint - measured) / scale
        self._demod_sum += error * self._sin()
        self._error_sum += error
        self._phase_index += 1
        if self._phase_index < cfg.perturb_period:
            return
        # d(error)/d(cores) from one full period of correlation.
        gradient = 2.0 * self._demod_sum / (cfg.perturb_period * cfg.perturb_amplitude)
        mean_error = self._error_sum / cfg.perturb_period
        step = -cfg.gain * mean_error * gradient
        limit = 2.0 * cfg.perturb_amplitude
        step = min(max(step, -limit), limit)
        self.base = self._clip_base(self.base + step)
        self._phase_index = 0
        self._demod_sum = 0.0
        self._error_sum = 0.0


def run_experiment(
    plant_config: PlantConfig,
    ctrl: ControllerConfig,
    schedule: InterferenceSchedule,
    experiment: ExperimentConfig,
) -> list[ControlRecord]:
    """Closed-loop runs over seeded repetitions; returns every window record."""
    wid = experiment.workload_id
    plant_config.workload(wid)  # validate the id early
    records: list[ControlRecord] = []
    for rep in range(experiment.repetitions):
        seed = plant_config.seed + rep
        plant = ContentionPlant(
            PlantConfig(
                workloads=plant_config.workloads,
                topology=plant_config.topology,
                total_cores=plant_config.total_cores,
                seed=seed,
                window_s=plant_config.window_s,
                noise_sigma=plant_config.noise_sigma,
            )
        )
        engine = Engine(
            topology=plant_config.topology,
            node_cores=experiment.node_cores or plant_config.total_cores,
            slos={wid: experiment.slo} if experiment.slo else {},
            config=EngineConfig(alpha=experiment.alpha),
        )
        seeker = ExtremumSeeker(config=ctrl, base=experiment.initial_cores)
        for t in range(experiment.windows):
            plant.interference = schedule.level(t)
            cores = seeker.next_allocation()
            batch, _ = plant.step(
                {
                    wid: Allocation(
                        cores=cores,
                        llc_kib=experiment.llc_alloc_kib,
                        load_rps=experiment.load_rps,
                    )
                }
            )
            report = engine.step(batch)
            workload_report = report.workload_reports[0]
            measured_p95 = batch[0].kpi_value
            measured = workload_report.buoyancy if ctrl.mode == MODE_BUOYANCY else measured_p95
            seeker.observe(measured)
            records.append(
                ControlRecord(
                    window=t,
                    seed=seed,
                    cores=cores,
                    p95_ms=measured_p95,
                    buoyancy=workload_report.buoyancy,
                    setpoint=ctrl.setpoint,
                    mode=ctrl.mode,
                )
            )
    return records


@dataclass(frozen=True, slots=True)
class WindowSummary:
    window: int
    cores_median: float
    cores_p10: float
    cores_p90: float
    p95_median: float
    buoyancy_median: float


def summarize_runs(records: Sequence[ControlRecord]) -> list[WindowSummary]:
    """Median and p10/p90 bands per window across seeded repetitions."""
    by_window: dict[int, list[ControlRecord]] = {}
    for r in records:
        by_window.setdefault(r.window, []).append(r)

    def p10_p90(values: list[float]) -> tuple[float, float]:
        if len(values) < 3:
            return (min(values), max(values))
        deciles = statistics.quantiles(values, n=10)
        return (deciles[0], deciles[8])

    out = []
    for window in sorted(by_window):
        rs = by_window[window]
        cores = [r.cores for r in rs]
        lo, hi = p10_p90(cores)
        out.append(
            WindowSummary(
                window=window,
                cores_median=statistics.median(cores),
                cores_p10=lo,
                cores_p90=hi,
                p95_median=statistics.median(r.p95_ms for r in rs),
                buoyancy_median=statistics.median(r.buoyancy for r in rs),
            )
        )
    return out


def format_records_csv(records: Sequence[ControlRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window", "seed", "cores", "p95_ms", "buoyancy", "setpoint", "mode"])
    for r in records:
        writer.writerow([r.window, r.seed, r.cores, r.p95_ms, r.buoyancy, r.setpoint, r.mode])
    return buf.getvalue()


def controller_config_from_dict(obj: dict) -> tuple[ControllerConfig, ExperimentConfig]:
    """Parse the controller JSON: spec fields plus the experiment block."""
    try:
        bounds = obj.get("actuation_bounds", {})
        ctrl = ControllerConfig(
            mode=obj["mode"],
            setpoint=float(obj["setpoint"]),
            perturb_amplitude=float(obj.get("perturb_amplitude", 0.25)),
            perturb_period=int(obj.get("perturb_period", 8)),
            gain=float(obj.get("gain", 0.5)),
            min_cores=float(bounds.get("min_cores", 1.0)),
            max_cores=float(bounds.get("max_cores", 8.0)),
        )
        exp = obj["experiment"]
        slo = None
        if "slo" in exp:
            slo = SloSpec(kpi_name=exp["slo"]["kpi_name"], slo_value=exp["slo"].get("slo_value"))
        experiment = ExperimentConfig(
            workload_id=exp["workload_id"],
            load_rps=float(exp["load_rps"]),
            initial_cores=float(exp["initial_cores"]),
            llc_alloc_kib=exp.get("llc_alloc_kib"),
            windows=int(exp.get("windows", 260)),
            repetitions=int(exp.get("repetitions", 10)),
            slo=slo,
            node_cores=exp.get("node_cores"),
            alpha=float(exp.get("alpha", 0.7)),
        )
        return ctrl, experiment
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"controller config: {exc}") from None
