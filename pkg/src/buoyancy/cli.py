"""Command-line entry points.

Subcommands:

* ``serve``          run the node agent and HTTP endpoints
* ``analyze``        headroom comparison from a medians table or a replay
* ``surface``        dump the buoyancy (P, r) surface as CSV
* ``controller-sim`` closed-loop extremum-seeking run against the plant

Exit codes: 0 clean, 1 configuration error, 2 runtime error.
"""

import argparse
import json
import logging
import signal
import sys
import threading

from . import analysis, controller
from .errors import BuoyancyError, ConfigError
from .server import AgentConfig, report_to_json, serve

log = logging.getLogger(__name__)


def _parse_listen(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"--listen must be HOST:PORT, got {value!r}")
    return (host or "127.0.0.1", int(port))


def _write_out(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_serve(args) -> int:
    config = AgentConfig.from_file(args.config)
    host, port = _parse_listen(args.listen)
    bound = {}

    def ready(server):
        bound["server"] = server
        log.info("listening on %s:%s", *server.server_address[:2])

        def handle_signal(signum, frame):
            # shutdown() blocks until the serve loop exits, so it must not
            # run on the thread executing serve_forever.
            threading.Thread(target=server.shutdown, daemon=True).start()

        signal.signal(signal.SIGINT, handle_signal)
        signal.signal(signal.SIGTERM, handle_signal)

    final = serve(config, host, port, ready=ready)
    if final is not None:
        sys.stdout.write(report_to_json(final) + "\n")
    return 0


def cmd_analyze(args) -> int:
    if args.input.endswith(".jsonl"):
        if not args.slo:
            raise ConfigError("replay analysis needs --slo CONFIG for SLOs and topology")
        config = AgentConfig.from_file(args.slo)
        segments = None
        if args.segments:
            raw = json.loads(args.segments)
            segments = {k: (int(v[0]), int(v[1])) for k, v in raw.items()}
        report = analysis.analyze_replay(args.input, config, segments=segments)
    else:
        report = analysis.analyze_medians(analysis.load_medians_file(args.input))
    if args.format == "csv":
        _write_out(analysis.format_headroom_csv(report), args.out)
    else:
        _write_out(analysis.format_headroom_table(report), args.out)
    return 0


def cmd_surface(args) -> int:
    points = analysis.surface_points(alpha=args.alpha, step=args.step)
    _write_out(analysis.format_surface_csv(points), args.out)
    return 0


def cmd_controller_sim(args) -> int:
    try:
        with open(args.plant, "r", encoding="utf-8") as fh:
            plant_obj = json.load(fh)
        with open(args.ctrl, "r", encoding="utf-8") as fh:
            ctrl_obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from None
    from .server import plant_config_from_dict

    plant_config = plant_config_from_dict(plant_obj)
    ctrl_config, experiment = controller.controller_config_from_dict(ctrl_obj)
    schedule = controller.InterferenceSchedule.from_file(args.schedule)
    records = controller.run_experiment(plant_config, ctrl_config, schedule, experiment)
    _write_out(controller.format_records_csv(records), args.out)
    summary = controller.summarize_runs(records)
    tail = summary[-1]
    sys.stderr.write(
        f"{len(records)} records over {experiment.repetitions} runs; final window "
        f"median cores {tail.cores_median:.2f}, median p95 {tail.p95_median:.2f} ms, "
        f"median buoyancy {tail.buoyancy_median:.3f}\n"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buoyancy",
        description="Workload resource scores, buoyancy headroom, and tooling.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the node agent")
    p.add_argument("--config", required=True, help="agent config JSON")
    p.add_argument("--listen", default="127.0.0.1:9500", help="HOST:PORT to bind")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("analyze", help="low/high-load headroom comparison")
    p.add_argument("--input", required=True, help="medians JSON or replay .jsonl")
    p.add_argument("--slo", help="agent config JSON (required for replay input)")
    p.add_argument("--segments", help='window ranges JSON, e.g. {"low":[0,5],"high":[5,10]}')
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("surface", help="dump the buoyancy surface grid")
    p.add_argument("--alpha", type=float, default=0.7)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("controller-sim", help="extremum-seeking closed loop")
    p.add_argument("--plant", required=True, help="plant config JSON")
    p.add_argument("--ctrl", required=True, help="controller config JSON")
    p.add_argument("--schedule", required=True, help="interference schedule JSON")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_controller_sim)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except BuoyancyError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
