"""Offline analyses: headroom comparison reports and buoyancy surfaces.

The headroom analysis contrasts how much tail latency moved against how
much buoyancy moved between a low-load and a high-load segment. Because
one metric rises and the other falls, changes are compared as log-changes
ln(high/low); the summary reports both means and the relative actuation
gap |mean buoyancy log-change| / mean latency log-change - 1.

Inputs are either a medians table (JSON) or a replay file that is run
through the scoring engine and split into segments.
"""

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

from .engine import Engine, buoyancy, log_change
from .errors import ConfigError, InsufficientData, SchemaError
from .server import AgentConfig
from .sources import ReplaySource


@dataclass(frozen=True, slots=True)
class WorkloadMedians:
    """Low/high-segment medians of p95 latency and buoyancy for one workload."""

    workload_id: str
    p95_low: float
    p95_high: float
    buoyancy_low: float
    buoyancy_high: float


@dataclass(frozen=True, slots=True)
class HeadroomRow:
    workload_id: str
    p95_low: float
    p95_high: float
    latency_pct_change: float  # fractional, e.g. 0.338
    latency_log_change: float
    buoyancy_low: float
    buoyancy_high: float
    buoyancy_pct_change: float
    buoyancy_log_change: float


@dataclass(frozen=True, slots=True)
class HeadroomReport:
    rows: list[HeadroomRow]
    mean_latency_log_change: float
    mean_buoyancy_log_change: float
    actuation_gap: Optional[float]  # fractional; None when latency did not move


def analyze_medians(medians: Sequence[WorkloadMedians]) -> HeadroomReport:
    """Build the headroom comparison from precomputed segment medians."""
    if not medians:
        raise InsufficientData("no workloads to analyze")
    rows = []
    for m in medians:
        rows.append(
            HeadroomRow(
                workload_id=m.workload_id,
                p95_low=m.p95_low,
                p95_high=m.p95_high,
                latency_pct_change=m.p95_high / m.p95_low - 1.0,
                latency_log_change=log_change(m.p95_low, m.p95_high),
                buoyancy_low=m.buoyancy_low,
                buoyancy_high=m.buoyancy_high,
                buoyancy_pct_change=m.buoyancy_high / m.buoyancy_low - 1.0,
                buoyancy_log_change=log_change(m.buoyancy_low, m.buoyancy_high),
            )
        )
    mean_lat = math.fsum(r.latency_log_change for r in rows) / len(rows)
    mean_buoy = math.fsum(r.buoyancy_log_change for r in rows) / len(rows)
    gap = abs(mean_buoy) / mean_lat - 1.0 if mean_lat != 0 else None
    return HeadroomReport(
        rows=rows,
        mean_latency_log_change=mean_lat,
        mean_buoyancy_log_change=mean_buoy,
        actuation_gap=gap,
    )


def load_medians_file(path: str) -> list[WorkloadMedians]:
    """Read a medians table: {"workloads": [{workload_id, p95_low_ms, ...}]}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read medians file {path!r}: {exc}") from None
    entries = obj.get("workloads")
    if not isinstance(entries, list) or not entries:
        raise SchemaError("workloads", "medians file needs a non-empty workload list")
    out = []
    for entry in entries:
        try:
            out.append(
                WorkloadMedians(
                    workload_id=entry["workload_id"],
                    p95_low=float(entry["p95_low_ms"]),
                    p95_high=float(entry["p95_high_ms"]),
                    buoyancy_low=float(entry["buoyancy_low"]),
                    buoyancy_high=float(entry["buoyancy_high"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError("workloads", f"bad medians entry {entry!r}: {exc}") from None
    return out


def analyze_replay(
    replay_path: str,
    config: AgentConfig,
    segments: Optional[dict[str, tuple[int, int]]] = None,
) -> HeadroomReport:
    """Run a replay through the engine and compare segment medians.

    ``segments`` maps {"low": (start, end), "high": (start, end)} window
    index ranges (end exclusive). By default the replay is split into
    equal halves: first half low, second half high.
    """
    engine = Engine(
        topology=config.topology,
        node_cores=config.node_cores,
        slos=config.slos,
        config=config.engine,
    )
    kpi: dict[str, list[tuple[int, float]]] = {}
    buoy: dict[str, list[tuple[int, float]]] = {}
    source = ReplaySource(replay_path, strict=config.replay_strict)
    n_windows = 0
    for index, batch in enumerate(source):
        report = engine.step(batch)
        n_windows = index + 1
        by_id = {s.workload_id: s for s in batch}
        for wr in report.workload_reports:
            buoy.setdefault(wr.workload_id, []).append((index, wr.buoyancy))
            sample = by_id[wr.workload_id]
            if sample.kpi_value is not None:
                kpi.setdefault(wr.workload_id, []).append((index, sample.kpi_value))

    if segments is None:
        if n_windows < 2:
            raise InsufficientData(
                f"need at least 2 windows to form low/high segments, got {n_windows}"
            )
        segments = {"low": (0, n_windows // 2), "high": (n_windows // 2, n_windows)}
    for name in ("low", "high"):
        if name not in segments:
            raise InsufficientData(f"missing segment {name!r}")

    def median_in(series: list[tuple[int, float]], span: tuple[int, int], what: str) -> float:
        values = [v for i, v in series if span[0] <= i < span[1]]
        if not values:
            raise InsufficientData(f"no {what} observations in windows [{span[0]}, {span[1]})")
        return statistics.median(values)

    medians = []
    for wid in buoy:
        if wid not in kpi:
            raise InsufficientData(f"workload {wid!r} never reported a KPI")
        medians.append(
            WorkloadMedians(
                workload_id=wid,
                p95_low=median_in(kpi[wid], segments["low"], "KPI"),
                p95_high=median_in(kpi[wid], segments["high"], "KPI"),
                buoyancy_low=median_in(buoy[wid], segments["low"], "buoyancy"),
                buoyancy_high=median_in(buoy[wid], segments["high"], "buoyancy"),
            )
        )
    return analyze_medians(medians)


def format_headroom_csv(report: HeadroomReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "workload_id",
            "p95_low_ms",
            "p95_high_ms",
            "latency_pct_change",
            "latency_log_change",
            "buoyancy_low",
            "buoyancy_high",
            "buoyancy_pct_change",
            "buoyancy_log_change",
        ]
    )
    for r in report.rows:
        writer.writerow(
            [
                r.workload_id,
                r.p95_low,
                r.p95_high,
                r.latency_pct_change,
                r.latency_log_change,
                r.buoyancy_low,
                r.buoyancy_high,
                r.buoyancy_pct_change,
                r.buoyancy_log_change,
            ]
        )
    writer.writerow([])
    writer.writerow(["mean_latency_log_change", report.mean_latency_log_change])
    writer.writerow(["mean_buoyancy_log_change", report.mean_buoyancy_log_change])
    writer.writerow(["actuation_gap", report.actuation_gap])
    return buf.getvalue()


def format_headroom_table(report: HeadroomReport) -> str:
    header = (
        f"{'workload':<12} {'p95 lo':>8} {'p95 hi':>8} {'lat %':>8} {'lat log':>8} "
        f"{'b lo':>8} {'b hi':>8} {'b %':>8} {'b log':>8}"
    )
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(
            f"{r.workload_id:<12} {r.p95_low:>8.2f} {r.p95_high:>8.2f} "
            f"{100 * r.latency_pct_change:>7.1f}% {r.latency_log_change:>8.2f} "
            f"{r.buoyancy_low:>8.2f} {r.buoyancy_high:>8.2f} "
            f"{100 * r.buoyancy_pct_change:>7.1f}% {r.buoyancy_log_change:>8.2f}"
        )
    lines.append("")
    lines.append(f"mean latency log-change:  {report.mean_latency_log_change:.3f}")
    lines.append(f"mean buoyancy log-change: {report.mean_buoyancy_log_change:.3f}")
    if report.actuation_gap is not None:
        lines.append(f"buoyancy actuation gap:   {100 * report.actuation_gap:.1f}%")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Buoyancy surface
# --------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SurfacePoint:
    case: str  # "single" or "second=<value>"
    p: float
    r: float
    b: float
    below_threshold: bool


def surface_points(
    alpha: float = 0.7,
    step: float = 0.05,
    threshold: float = 0.1,
    second_scores: Sequence[float] = (0.3, 0.8),
) -> list[SurfacePoint]:
    """Buoyancy over a (P, r) grid, single-score plus fixed-second-score cases."""
    if not 0.0 < step <= 0.5:
        raise ValueError(f"step must be in (0, 0.5], got {step}")
    n = math.floor(1.0 / step + 1e-9) + 1
    grid = [i * step for i in range(n)]
    points = []
    cases: list[tuple[str, Optional[float]]] = [("single", None)]
    cases.extend((f"second={s:g}", s) for s in second_scores)
    for case, second in cases:
        for p in grid:
            for r in grid:
                scores = [r] if second is None else [r, second]
                b = buoyancy(p, scores, alpha)
                points.append(
                    SurfacePoint(case=case, p=p, r=r, b=b, below_threshold=b <= threshold)
                )
    return points


def format_surface_csv(points: Sequence[SurfacePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case", "p", "r", "b", "below_threshold"])
    for pt in points:
        writer.writerow([pt.case, repr(pt.p), repr(pt.r), repr(pt.b), int(pt.below_threshold)])
    return buf.getvalue()
