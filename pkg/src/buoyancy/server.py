"""The node agent: engine loop plus HTTP endpoints.

One thread runs the engine at the configured window cadence and swaps a
complete, immutable report snapshot into place after every step. HTTP
handlers only ever read one snapshot reference, so scrapes never observe
a half-written window.

Endpoints: ``/metrics`` (OpenMetrics text), ``/v1/node`` (JSON report),
``/v1/workloads/{id}`` (JSON per-workload report, 404 if unknown), and
``/healthz``.
"""

import dataclasses
import json
import logging
import threading
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional

from .engine import Engine, EngineConfig, NodeReport
from .errors import BindError, ConfigError, EmptyNode
from .exposition import CONTENT_TYPE, render_openmetrics
from .model import CacheTopology, SloSpec
from .sources import Allocation, ContentionPlant, PlantConfig, PlantSource, PlantWorkload, ReplaySource

log = logging.getLogger(__name__)


def _require(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{where}: missing {key!r}")
    return obj[key]


def _topology_from_config(obj: dict) -> CacheTopology:
    try:
        return CacheTopology(
            l1_size_kib=float(_require(obj, "l1_size_kib", "topology")),
            l2_size_kib=float(_require(obj, "l2_size_kib", "topology")),
            l3_size_kib=float(_require(obj, "l3_size_kib", "topology")),
            l3_ways=int(_require(obj, "l3_ways", "topology")),
            mem_speed_mts=float(_require(obj, "mem_speed_mts", "topology")),
            mem_bus_width_bytes=float(_require(obj, "mem_bus_width_bytes", "topology")),
            mem_channels=int(_require(obj, "mem_channels", "topology")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"topology: {exc}") from None


def plant_config_from_dict(obj: dict) -> PlantConfig:
    """Build a PlantConfig from its JSON form."""
    try:
        workloads = tuple(
            PlantWorkload(
                id=_require(w, "id", "plant workload"),
                service_rate_per_core=float(_require(w, "service_rate_per_core", "plant workload")),
                base_latency_ms=float(_require(w, "base_latency_ms", "plant workload")),
                latency_gain=float(_require(w, "latency_gain", "plant workload")),
                working_set_kib=float(_require(w, "working_set_kib", "plant workload")),
                mbw_per_req_bytes=float(_require(w, "mbw_per_req_bytes", "plant workload")),
                interference_sensitivity=float(w.get("interference_sensitivity", 0.0)),
            )
            for w in _require(obj, "workloads", "plant")
        )
        return PlantConfig(
            workloads=workloads,
            topology=_topology_from_config(_require(obj, "topology", "plant")),
            total_cores=float(_require(obj, "total_cores", "plant")),
            seed=int(obj.get("seed", 0)),
            window_s=float(obj.get("window_s", 1.0)),
            noise_sigma=float(obj.get("noise_sigma", 0.01)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"plant: {exc}") from None


@dataclasses.dataclass(frozen=True)
class AgentConfig:
    """Parsed service configuration."""

    window_s: float
    topology: CacheTopology
    node_cores: float
    engine: EngineConfig
    slos: dict[str, SloSpec]
    source_type: str  # "replay" | "plant"
    replay_path: Optional[str] = None
    replay_strict: bool = True
    plant: Optional[PlantConfig] = None
    allocations: Optional[dict[str, Allocation]] = None
    interference: float = 0.0

    @staticmethod
    def from_dict(obj: dict) -> "AgentConfig":
        try:
            topology = _topology_from_config(_require(obj, "topology", "config"))
            engine = EngineConfig(
                alpha=float(obj.get("alpha", 0.7)),
                violation_threshold=float(obj.get("violation_threshold", 0.1)),
                ema_factor=float(obj.get("ema_factor", 1.0)),
                expiry_windows=int(obj.get("expiry_windows", 3)),
            )
            slos = {
                wid: SloSpec(
                    kpi_name=_require(spec, "kpi_name", f"slo[{wid}]"),
                    slo_value=spec.get("slo_value"),
                )
                for wid, spec in obj.get("slo", {}).items()
            }
            source = _require(obj, "source", "config")
            source_type = _require(source, "type", "source")
            cfg = dict(
                window_s=float(obj.get("window_s", 1.0)),
                topology=topology,
                node_cores=float(_require(obj, "node_cores", "config")),
                engine=engine,
                slos=slos,
                source_type=source_type,
            )
            if source_type == "replay":
                cfg["replay_path"] = _require(source, "path", "source")
                cfg["replay_strict"] = bool(source.get("strict", True))
            elif source_type == "plant":
                cfg["plant"] = plant_config_from_dict(_require(source, "plant", "source"))
                cfg["allocations"] = {
                    wid: Allocation(
                        cores=float(_require(a, "cores", f"allocations[{wid}]")),
                        llc_kib=a.get("llc_kib"),
                        load_rps=float(a.get("load_rps", 0.0)),
                    )
                    for wid, a in _require(source, "allocations", "source").items()
                }
                cfg["interference"] = float(source.get("interference", 0.0))
            else:
                raise ConfigError(f"source.type must be 'replay' or 'plant', got {source_type!r}")
            return AgentConfig(**cfg)
        except ConfigError:
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(str(exc)) from None

    @staticmethod
    def from_file(path: str) -> "AgentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
        return AgentConfig.from_dict(obj)


def _json_default(value):
    if isinstance(value, datetime):
        return value.isoformat()
    raise TypeError(f"not JSON serializable: {type(value)!r}")


def report_to_json(report) -> str:
    return json.dumps(dataclasses.asdict(report), default=_json_default)


class MetricsAgent:
    """Owns the engine loop and the latest report snapshot."""

    def __init__(self, config: AgentConfig):
        self.config = config
        self.engine = Engine(
            topology=config.topology,
            node_cores=config.node_cores,
            slos=config.slos,
            config=config.engine,
        )
        if config.source_type == "replay":
            self._source = ReplaySource(config.replay_path, strict=config.replay_strict)
        else:
            plant = ContentionPlant(config.plant, interference=config.interference)
            self._source = PlantSource(plant, config.allocations)
        self._snapshot: Optional[NodeReport] = None
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def snapshot(self) -> Optional[NodeReport]:
        return self._snapshot

    def step_once(self) -> bool:
        """Pull one batch and refresh the snapshot. False at end of stream."""
        batch = self._source.next_batch()
        if batch is None:
            return False
        try:
            self._snapshot = self.engine.step(batch)
        except EmptyNode:
            log.debug("empty window, keeping previous snapshot")
        return True

    def _run(self):
        while not self._stop.is_set():
            if not self.step_once():
                log.info("telemetry source exhausted; serving last snapshot")
                return
            self._stop.wait(self.config.window_s)

    def start(self):
        self._thread = threading.Thread(target=self._run, name="engine-loop", daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)


class _Handler(BaseHTTPRequestHandler):
    agent: MetricsAgent = None  # set by make_server

    def log_message(self, fmt, *args):  # route http.server chatter to logging
        log.debug("http: " + fmt, *args)

    def _send(self, status: int, body: str, content_type: str = "text/plain; charset=utf-8"):
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):  # noqa: N802 (http.server API)
        path = self.path.split("?", 1)[0]
        if path == "/healthz":
            self._send(200, "ok")
            return
        report = self.agent.snapshot()
        if path == "/metrics":
            if report is None:
                self._send(503, "no report yet")
                return
            self._send(200, render_openmetrics(report), content_type=CONTENT_TYPE)
        elif path == "/v1/node":
            if report is None:
                self._send(503, "no report yet")
                return
            self._send(200, report_to_json(report), content_type="application/json")
        elif path.startswith("/v1/workloads/"):
            if report is None:
                self._send(503, "no report yet")
                return
            wid = path[len("/v1/workloads/"):]
            for wr in report.workload_reports:
                if wr.workload_id == wid:
                    self._send(200, report_to_json(wr), content_type="application/json")
                    return
            self._send(404, f"unknown workload {wid!r}")
        else:
            self._send(404, "not found")


def make_server(agent: MetricsAgent, host: str, port: int) -> ThreadingHTTPServer:
    """Bind the HTTP listener; raises BindError if the address is taken."""
    handler = type("Handler", (_Handler,), {"agent": agent})
    try:
        return ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from None


def serve(config: AgentConfig, host: str, port: int, ready=None) -> NodeReport:
    """Run the agent until interrupted; returns the final report snapshot.

    ``ready`` is an optional callback invoked with the bound server once
    listening (used by tests to learn the ephemeral port).
    """
    agent = MetricsAgent(config)
    server = make_server(agent, host, port)
    agent.start()
    if ready is not None:
        ready(server)
    try:
        server.serve_forever(poll_interval=0.1)
    finally:
        agent.stop()
        server.server_close()
    return agent.snapshot()
