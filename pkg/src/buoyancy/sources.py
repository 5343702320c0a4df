"""Telemetry producers: JSONL replay and a synthetic contention plant.

Both expose the same pull interface: ``next_batch()`` returns one
window's list of samples, or None at end of stream. Each source instance
is single-consumer.

The plant is a desk-scale stand-in for a contended node. Per workload,
with allocation (cores c, LLC share s, offered load lam req/s):

* service rate  mu = c * mu1 * (1 - gamma * I), where I in [0, 1] is the
  externally driven co-location pressure;
* p95 latency   L0 + K / (mu - lam) while lam < 0.95 mu, and 10x the
  saturation value past that point (the overload knee);
* miss ratios   exactly on the power law M(x) = sqrt(W / x) clamped to 1,
  evaluated at the L1, L2, and allocated-LLC sizes, so the scoring fit
  can recover the planted curve and the plant doubles as a fit oracle;
* memory traffic scales with load and with how much the allocated LLC
  misses relative to the full cache.

Counters and the reported KPI get multiplicative Gaussian noise
(``noise_sigma``, default 1%); set it to 0 for exact-oracle tests. The
closed-form latency is also returned separately as ground truth.
"""

import json
import logging
import math
import random
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timedelta, timezone
from typing import IO, Mapping, Optional, Union

from .errors import CapacityExceeded, ParseError, SchemaError
from .model import CacheTopology, TelemetrySample, validate_topology

log = logging.getLogger(__name__)

_EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc)

#: Synthetic memory references issued per request.
REFS_PER_REQUEST = 10_000

#: Load fraction of the service rate past which the plant is saturated.
OVERLOAD_POINT = 0.95
OVERLOAD_MULTIPLIER = 10.0


# --------------------------------------------------------------------------
# JSONL replay
# --------------------------------------------------------------------------

_SCHEMA = {
    # field -> (accepted types, allow null)
    "workload_id": (str, False),
    "window_start": (str, False),
    "window_end": (str, False),
    "cpu_user_time_s": ((int, float), False),
    "cpu_alloc_cores": ((int, float), False),
    "mem_refs": (int, False),
    "l1_miss": (int, False),
    "l2_miss": (int, False),
    "l3_miss": (int, False),
    "mbw_bytes": (int, False),
    "mbw_alloc_bytes_per_s": (int, True),
    "llc_alloc_kib": ((int, float), True),
    "kpi_value": ((int, float), True),
}


def _parse_rfc3339(value: str, field: str) -> datetime:
    try:
        return datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaError(field, f"not an RFC3339 timestamp: {value!r}") from None


def parse_telemetry_record(obj: dict, strict: bool = True) -> TelemetrySample:
    """Validate one decoded JSONL object into a TelemetrySample."""
    if not isinstance(obj, dict):
        raise SchemaError("<record>", "each line must be a JSON object")
    for key in obj:
        if key not in _SCHEMA:
            if strict:
                raise SchemaError(key, "unknown field")
            log.warning("ignoring unknown telemetry field %r", key)
    fields = {}
    for key, (types, nullable) in _SCHEMA.items():
        if key not in obj:
            raise SchemaError(key, "missing")
        value = obj[key]
        if value is None:
            if not nullable:
                raise SchemaError(key, "must not be null")
            fields[key] = None
            continue
        if isinstance(value, bool) or not isinstance(value, types):
            raise SchemaError(key, f"expected {types}, got {type(value).__name__}")
        fields[key] = value
    if not fields["workload_id"]:
        raise SchemaError("workload_id", "must be non-empty")
    if fields["cpu_alloc_cores"] <= 0:
        raise SchemaError("cpu_alloc_cores", "must be > 0")
    for key in ("mem_refs", "l1_miss", "l2_miss", "l3_miss", "mbw_bytes"):
        if fields[key] < 0:
            raise SchemaError(key, "must be >= 0")
    if fields["cpu_user_time_s"] < 0:
        raise SchemaError("cpu_user_time_s", "must be >= 0")
    if fields["mbw_alloc_bytes_per_s"] is not None and fields["mbw_alloc_bytes_per_s"] <= 0:
        raise SchemaError("mbw_alloc_bytes_per_s", "must be > 0 when present")
    if fields["llc_alloc_kib"] is not None and fields["llc_alloc_kib"] <= 0:
        raise SchemaError("llc_alloc_kib", "must be > 0 when present")
    if fields["kpi_value"] is not None and fields["kpi_value"] < 0:
        raise SchemaError("kpi_value", "must be >= 0")

    start = _parse_rfc3339(fields["window_start"], "window_start")
    end = _parse_rfc3339(fields["window_end"], "window_end")
    if end <= start:
        raise SchemaError("window_end", "window must end after it starts")
    return TelemetrySample(
        workload_id=fields["workload_id"],
        window_start=start,
        window_end=end,
        cpu_user_time_s=float(fields["cpu_user_time_s"]),
        cpu_alloc_cores=float(fields["cpu_alloc_cores"]),
        mem_refs=fields["mem_refs"],
        l1_miss=fields["l1_miss"],
        l2_miss=fields["l2_miss"],
        l3_miss=fields["l3_miss"],
        mbw_bytes=fields["mbw_bytes"],
        mbw_alloc_bytes_per_s=fields["mbw_alloc_bytes_per_s"],
        llc_alloc_kib=fields["llc_alloc_kib"],
        kpi_value=fields["kpi_value"],
    )


class ReplaySource:
    """Deterministic replay of a JSONL telemetry file.

    One JSON object per workload-window per line; consecutive lines with
    the same (window_start, window_end) form one batch, in file order.
    """

    def __init__(self, source: Union[str, IO[str]], strict: bool = True):
        self._fh = open(source, "r", encoding="utf-8") if isinstance(source, str) else source
        self._strict = strict
        self._line_no = 0
        self._pending: Optional[TelemetrySample] = None
        self._pending_error: Optional[Exception] = None
        self._exhausted = False

    def _read_sample(self) -> Optional[TelemetrySample]:
        while True:
            line = self._fh.readline()
            if line == "":
                return None
            self._line_no += 1
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(self._line_no, str(exc)) from None
            return parse_telemetry_record(obj, strict=self._strict)

    def next_batch(self) -> Optional[list[TelemetrySample]]:
        """Return the next window's samples, or None at end of stream.

        Window boundaries are only visible one record ahead, so an error
        hit while looking ahead is held back until the batch before it
        has been delivered.
        """
        if self._pending_error is not None:
            error, self._pending_error = self._pending_error, None
            self._exhausted = True
            raise error
        if self._exhausted:
            return None
        first = self._pending if self._pending is not None else self._read_sample()
        self._pending = None
        if first is None:
            self._exhausted = True
            return None
        batch = [first]
        window = (first.window_start, first.window_end)
        while True:
            try:
                sample = self._read_sample()
            except (ParseError, SchemaError) as exc:
                self._pending_error = exc
                break
            if sample is None:
                self._exhausted = True
                break
            if (sample.window_start, sample.window_end) != window:
                self._pending = sample
                break
            batch.append(sample)
        return batch

    def __iter__(self):
        while True:
            batch = self.next_batch()
            if batch is None:
                return
            yield batch

    def close(self):
        self._fh.close()


# --------------------------------------------------------------------------
# Synthetic contention plant
# --------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class PlantWorkload:
    """Closed-form behaviour of one synthetic workload."""

    id: str
    service_rate_per_core: float  # req/s per core (mu1)
    base_latency_ms: float  # L0
    latency_gain: float  # K, ms * req/s
    working_set_kib: float  # scale of the planted miss-ratio curve
    mbw_per_req_bytes: float
    interference_sensitivity: float = 0.0  # gamma in [0, 1]

    def __post_init__(self):
        if self.service_rate_per_core <= 0:
            raise ValueError("service_rate_per_core must be > 0")
        if self.latency_gain <= 0:
            raise ValueError("latency_gain must be > 0")
        if self.base_latency_ms < 0:
            raise ValueError("base_latency_ms must be >= 0")
        if self.working_set_kib <= 0:
            raise ValueError("working_set_kib must be > 0")
        if not 0.0 <= self.interference_sensitivity <= 1.0:
            raise ValueError("interference_sensitivity must be in [0, 1]")

    def miss_ratio(self, cache_kib: float) -> float:
        """Planted miss-ratio curve sqrt(W/x), clamped to 1."""
        return min(math.sqrt(self.working_set_kib / cache_kib), 1.0)

    def p95_latency_ms(self, cores: float, load_rps: float, interference: float) -> float:
        """Closed-form tail latency; 10x knee past 95% saturation."""
        mu = cores * self.service_rate_per_core * (1.0 - self.interference_sensitivity * interference)
        if mu <= 0:
            return math.inf
        if load_rps < OVERLOAD_POINT * mu:
            return self.base_latency_ms + self.latency_gain / (mu - load_rps)
        saturated = self.base_latency_ms + self.latency_gain / ((1.0 - OVERLOAD_POINT) * mu)
        return saturated * OVERLOAD_MULTIPLIER


@dataclass(frozen=True, slots=True)
class PlantConfig:
    """Node geometry, workload population, and noise of the plant."""

    workloads: tuple[PlantWorkload, ...]
    topology: CacheTopology
    total_cores: float
    seed: int = 0
    window_s: float = 1.0
    noise_sigma: float = 0.01

    def __post_init__(self):
        validate_topology(self.topology)
        if self.total_cores <= 0:
            raise ValueError("total_cores must be > 0")
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        ids = [w.id for w in self.workloads]
        if len(set(ids)) != len(ids):
            raise ValueError("workload ids must be unique")

    def workload(self, wid: str) -> PlantWorkload:
        for w in self.workloads:
            if w.id == wid:
                return w
        raise KeyError(wid)


@dataclass(frozen=True, slots=True)
class Allocation:
    """Per-workload actuation input to one plant step."""

    cores: float
    llc_kib: Optional[float] = None  # None: full shared LLC
    load_rps: float = 0.0


@dataclass
class ContentionPlant:
    """Deterministic synthetic plant; reproducible for a given seed."""

    config: PlantConfig
    interference: float = 0.0
    _rng: random.Random = dc_field(init=False, repr=False)
    _window_index: int = dc_field(init=False, default=0, repr=False)

    def __post_init__(self):
        self._rng = random.Random(self.config.seed)

    def _noisy(self, value: float) -> float:
        sigma = self.config.noise_sigma
        if sigma <= 0 or value == 0 or not math.isfinite(value):
            return value
        return max(value * (1.0 + sigma * self._rng.gauss(0.0, 1.0)), 0.0)

    def step(
        self, allocations: Mapping[str, Allocation]
    ) -> tuple[list[TelemetrySample], dict[str, float]]:
        """Advance one window; returns (samples, true p95 latencies by id)."""
        cfg = self.config
        topo = cfg.topology
        total_cores = math.fsum(a.cores for a in allocations.values())
        if total_cores > cfg.total_cores + 1e-9:
            raise CapacityExceeded(
                f"allocated {total_cores} cores on a {cfg.total_cores}-core node"
            )
        explicit_llc = math.fsum(
            a.llc_kib for a in allocations.values() if a.llc_kib is not None
        )
        if explicit_llc > topo.l3_size_kib + 1e-9:
            raise CapacityExceeded(
                f"allocated {explicit_llc} KiB of a {topo.l3_size_kib} KiB LLC"
            )
        for wid, alloc in allocations.items():
            if alloc.cores <= 0:
                raise CapacityExceeded(f"workload {wid!r} allocated {alloc.cores} cores")
            if alloc.load_rps < 0:
                raise ValueError(f"workload {wid!r} load must be >= 0")

        window = cfg.window_s
        start = _EPOCH + timedelta(seconds=self._window_index * window)
        end = start + timedelta(seconds=window)
        self._window_index += 1
        if not 0.0 <= self.interference <= 1.0:
            raise ValueError("interference must be in [0, 1]")

        samples: list[TelemetrySample] = []
        true_latency: dict[str, float] = {}
        for wid, alloc in allocations.items():
            w = cfg.workload(wid)
            lam = alloc.load_rps
            s_llc = alloc.llc_kib if alloc.llc_kib is not None else topo.l3_size_kib

            latency = w.p95_latency_ms(alloc.cores, lam, self.interference)
            true_latency[wid] = latency

            m_l1 = w.miss_ratio(topo.l1_size_kib)
            m_l2 = w.miss_ratio(topo.l2_size_kib)
            m_l3 = w.miss_ratio(s_llc)
            m_ref = w.miss_ratio(topo.l3_size_kib)

            refs = lam * window * REFS_PER_REQUEST
            cpu_time = min(lam / w.service_rate_per_core, alloc.cores) * window
            mbw = lam * window * w.mbw_per_req_bytes * (m_l3 / m_ref)

            samples.append(
                TelemetrySample(
                    workload_id=wid,
                    window_start=start,
                    window_end=end,
                    cpu_user_time_s=self._noisy(cpu_time),
                    cpu_alloc_cores=alloc.cores,
                    mem_refs=round(self._noisy(refs)),
                    l1_miss=round(self._noisy(refs * m_l1)),
                    l2_miss=round(self._noisy(refs * m_l2)),
                    l3_miss=round(self._noisy(refs * m_l3)),
                    mbw_bytes=round(self._noisy(mbw)),
                    mbw_alloc_bytes_per_s=None,
                    llc_alloc_kib=alloc.llc_kib,
                    kpi_value=self._noisy(latency),
                )
            )
        return samples, true_latency


class PlantSource:
    """Adapter driving a plant with fixed allocations, as a sample source."""

    def __init__(
        self,
        plant: ContentionPlant,
        allocations: Mapping[str, Allocation],
        windows: Optional[int] = None,
    ):
        self._plant = plant
        self._allocations = dict(allocations)
        self._remaining = windows

    def next_batch(self) -> Optional[list[TelemetrySample]]:
        if self._remaining is not None:
            if self._remaining <= 0:
                return None
            self._remaining -= 1
        batch, _ = self._plant.step(self._allocations)
        return batch


def demo_plant_config(seed: int = 0, noise_sigma: float = 0.01) -> PlantConfig:
    """A calibrated single-workload plant used by the docs and tests.

    The workload saturates memory bandwidth around half load while its
    latency knee sits near 70% load, so headroom erodes well before the
    latency curve shows it. Pair with a 16 ms p95 SLO and an allocation
    of 4 cores and 2048 KiB of LLC.
    """
    return PlantConfig(
        workloads=(
            PlantWorkload(
                id="webapp",
                service_rate_per_core=100.0,
                base_latency_ms=2.0,
                latency_gain=1600.0,
                working_set_kib=48.0,
                mbw_per_req_bytes=174e6,
                interference_sensitivity=0.8,
            ),
        ),
        topology=CacheTopology(
            l1_size_kib=80.0,
            l2_size_kib=1280.0,
            l3_size_kib=12288.0,
            l3_ways=12,
            mem_speed_mts=2666.0,
            mem_bus_width_bytes=8.0,
            mem_channels=4,
        ),
        total_cores=8.0,
        seed=seed,
        noise_sigma=noise_sigma,
    )
