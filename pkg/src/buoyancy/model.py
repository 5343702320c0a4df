"""Core domain types for workload telemetry and scoring.

All types are immutable value objects; the operations on them are pure
functions. Cache sizes are carried in KiB and bandwidth in bytes/second;
unit conversion belongs at interface boundaries, not here.
"""

from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Optional

from .errors import NonIncreasingCacheSizes, NonPositiveGeometry, SchemaError

#: Buoyancy at or below this value flags a workload as approaching an
#: SLO violation.
DEFAULT_VIOLATION_THRESHOLD = 0.1


@dataclass(frozen=True, slots=True)
class CacheTopology:
    """Cache and memory geometry of one node.

    L1 size is the combined data+instruction size per core; L3 is the
    full last-level cache available to a workload on this node.
    """

    l1_size_kib: float
    l2_size_kib: float
    l3_size_kib: float
    l3_ways: int
    mem_speed_mts: float
    mem_bus_width_bytes: float
    mem_channels: int


def validate_topology(t: CacheTopology) -> CacheTopology:
    """Return ``t`` unchanged iff all geometry invariants hold."""
    positive = (
        ("l1_size_kib", t.l1_size_kib),
        ("l2_size_kib", t.l2_size_kib),
        ("l3_size_kib", t.l3_size_kib),
        ("l3_ways", t.l3_ways),
        ("mem_speed_mts", t.mem_speed_mts),
        ("mem_bus_width_bytes", t.mem_bus_width_bytes),
        ("mem_channels", t.mem_channels),
    )
    for name, value in positive:
        if not value > 0:
            raise NonPositiveGeometry(f"{name} must be > 0, got {value}")
    if not (t.l1_size_kib < t.l2_size_kib < t.l3_size_kib):
        raise NonIncreasingCacheSizes(
            f"cache sizes must be strictly increasing, got "
            f"{t.l1_size_kib} / {t.l2_size_kib} / {t.l3_size_kib} KiB"
        )
    return t


def theoretical_max_mbw(t: CacheTopology) -> float:
    """Theoretical peak memory bandwidth of the node, bytes/second.

    Product of transfer rate (MT/s), bytes per transfer, and channel count.
    """
    return t.mem_speed_mts * 1e6 * t.mem_bus_width_bytes * t.mem_channels


def llc_way_size(t: CacheTopology) -> float:
    """Size of one LLC way in KiB (real-valued; no divisibility assumed)."""
    return t.l3_size_kib / t.l3_ways


@dataclass(frozen=True, slots=True)
class SloSpec:
    """Service-level objective on one KPI.

    Direction is fixed to lower-is-better (latency style). ``slo_value``
    of None means no SLO is set for the workload.
    """

    kpi_name: str
    slo_value: Optional[float] = None


@dataclass(frozen=True, slots=True)
class TelemetrySample:
    """Raw counters and KPI for one workload over one observation window."""

    workload_id: str
    window_start: datetime
    window_end: datetime
    cpu_user_time_s: float
    cpu_alloc_cores: float
    mem_refs: int
    l1_miss: int
    l2_miss: int
    l3_miss: int
    mbw_bytes: int
    mbw_alloc_bytes_per_s: Optional[float] = None
    llc_alloc_kib: Optional[float] = None
    kpi_value: Optional[float] = None

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise SchemaError("window_end", "window must have positive length")
        for name in ("cpu_user_time_s", "mem_refs", "l1_miss", "l2_miss", "l3_miss", "mbw_bytes"):
            if getattr(self, name) < 0:
                raise SchemaError(name, "must be >= 0")
        if self.kpi_value is not None and self.kpi_value < 0:
            raise SchemaError("kpi_value", "must be >= 0")

    @property
    def window_s(self) -> float:
        """Window length in seconds."""
        return (self.window_end - self.window_start).total_seconds()


@dataclass(frozen=True)
class ResourceScores:
    """Per-resource scores of one workload, each in [0, 1].

    ``extra`` holds additional named scores (network, disk, ...) so new
    resources can ride along without changing this type. Treat it as
    read-only.
    """

    cpu: float
    llc: float
    mbw: float
    extra: Mapping[str, float] = field(default_factory=dict)

    def values(self) -> list[float]:
        return [self.cpu, self.llc, self.mbw, *self.extra.values()]

    def as_dict(self) -> dict:
        d = {"cpu": self.cpu, "llc": self.llc, "mbw": self.mbw}
        if self.extra:
            d["extra"] = dict(self.extra)
        return d


@dataclass(frozen=True, slots=True)
class BuoyancyReport:
    """Computed performance and headroom scores for one workload-window.

    ``perf_score`` and ``buoyancy`` live in (-inf, 1]; negative values mean
    the SLO is currently violated.
    """

    workload_id: str
    perf_score: float
    buoyancy: float
    resource_scores: ResourceScores
    approaching_violation: bool
