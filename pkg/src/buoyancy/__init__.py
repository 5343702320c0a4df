"""Workload resource scores, buoyancy headroom, and node-level aggregation.

The package computes per-workload resource scores (CPU, last-level cache,
memory bandwidth) from raw telemetry windows, combines them with SLO
slack into a buoyancy headroom score, aggregates to node level, and ships
the operational shell around that: telemetry sources, an OpenMetrics
agent, analysis CLIs, and an extremum-seeking controller simulation.
"""

from .engine import (
    Engine,
    EngineConfig,
    NodeReport,
    buoyancy,
    log_change,
    node_buoyancy,
    node_resource_scores,
    perf_score,
)
from .errors import (
    BindError,
    BuoyancyError,
    CapacityExceeded,
    ConfigError,
    EmptyNode,
    EmptyScoreSet,
    InsufficientData,
    InvalidSlo,
    NoMemoryTraffic,
    NonIncreasingCacheSizes,
    NonPositiveGeometry,
    NonPositiveInput,
    ParseError,
    SchemaError,
    ZeroAllocation,
)
from .model import (
    BuoyancyReport,
    CacheTopology,
    ResourceScores,
    SloSpec,
    TelemetrySample,
    llc_way_size,
    theoretical_max_mbw,
    validate_topology,
)
from .scores import (
    MrcFit,
    cpu_score,
    fit_mrc,
    fit_power_law,
    llc_score,
    mbw_score,
    miss_ratios,
    score_workload,
)
from .sources import (
    Allocation,
    ContentionPlant,
    PlantConfig,
    PlantSource,
    PlantWorkload,
    ReplaySource,
    demo_plant_config,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BindError",
    "BuoyancyError",
    "BuoyancyReport",
    "CacheTopology",
    "CapacityExceeded",
    "ConfigError",
    "ContentionPlant",
    "EmptyNode",
    "EmptyScoreSet",
    "Engine",
    "EngineConfig",
    "InsufficientData",
    "InvalidSlo",
    "MrcFit",
    "NoMemoryTraffic",
    "NodeReport",
    "NonIncreasingCacheSizes",
    "NonPositiveGeometry",
    "NonPositiveInput",
    "ParseError",
    "PlantConfig",
    "PlantSource",
    "PlantWorkload",
    "ReplaySource",
    "ResourceScores",
    "SchemaError",
    "SloSpec",
    "TelemetrySample",
    "ZeroAllocation",
    "buoyancy",
    "cpu_score",
    "demo_plant_config",
    "fit_mrc",
    "fit_power_law",
    "llc_score",
    "llc_way_size",
    "log_change",
    "mbw_score",
    "miss_ratios",
    "node_buoyancy",
    "node_resource_scores",
    "perf_score",
    "score_workload",
    "theoretical_max_mbw",
    "validate_topology",
]
