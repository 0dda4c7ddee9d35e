"""Command-line interface: one executable, subcommands per workflow step.

Exit codes: 0 success, 2 configuration/usage error, 3 map error,
4 runtime/I-O error. Progress goes to stderr so stdout stays pipeable.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import load_config
from .errors import (
    ConfigError,
    InitError,
    MapError,
    OrchestratorError,
    ParseError,
    ProcError,
    RouteError,
    RunError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MAP = 3
EXIT_RUNTIME = 4


def _progress(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _parse_range(text: str, flag: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"{flag} expects lo:hi, got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{flag} expects integers, got {text!r}") from exc
    if lo > hi or lo < 0:
        raise ConfigError(f"{flag} range is invalid: {text!r}")
    return lo, hi


def _parse_sets(values: list[str] | None) -> list[tuple[str, str]]:
    pairs = []
    for item in values or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    return pairs


def _ingest_config(args):
    from .worldmap import IngestConfig

    return IngestConfig(
        seed=args.seed,
        unit_area=args.unit_area,
        rent_range=_parse_range(args.rent_range, "--rent-range"),
        wage_range=_parse_range(args.wage_range, "--wage-range"),
        meal_range=_parse_range(args.meal_range, "--meal-range"),
    )


def cmd_ingest(args) -> int:
    from .worldmap import ingest_map, save_map

    world = ingest_map(args.buildings, args.units, args.walkways, _ingest_config(args))
    save_map(world, args.out)
    _progress(
        args,
        f"ingested {len(world.building_list)} buildings, {len(world.unit_list)} units, "
        f"{len(world.graph)} walkway nodes -> {args.out}",
    )
    return EXIT_OK


def cmd_validate(args) -> int:
    from .worldmap import ingest_map, load_map, validate_map

    if args.map:
        world = load_map(args.map)
    else:
        if not (args.buildings and args.walkways):
            raise ConfigError("validate needs either --map or --buildings/--walkways")
        world = ingest_map(args.buildings, args.units, args.walkways, _ingest_config(args))
    report = validate_map(world)
    text = report.render()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report.ok else EXIT_MAP


def cmd_synth_map(args) -> int:
    from .synthmap import generate_grid_city, parse_grid_spec, write_layers

    nx, ny = parse_grid_spec(args.grid)
    layers = generate_grid_city(nx, ny, spacing=args.spacing, seed=args.seed, unit_area=args.unit_area)
    paths = write_layers(layers, args.out)
    _progress(args, f"wrote synthetic {nx}x{ny} city layers to {args.out}")
    if args.ingest:
        from .worldmap import ingest_map, save_map

        world = ingest_map(paths["buildings"], paths["buildingUnits"], paths["walkways"], _ingest_config(args))
        map_path = os.path.join(args.out, "map.polmap")
        save_map(world, map_path)
        _progress(args, f"ingested synthetic city -> {map_path}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .engine import run
    from .worldmap import load_map

    overrides = _parse_sets(args.set)
    if args.seed is not None:
        overrides.append(("seed", str(args.seed)))
    if args.ticks is not None:
        overrides.append(("ticks", str(args.ticks)))
    if args.agents is not None:
        overrides.append(("agents", str(args.agents)))
    cfg = load_config(args.config, overrides)
    if args.out:
        cfg.out = args.out
    if not cfg.out:
        raise ConfigError("run needs an output directory (--out or config key 'out')")
    world = load_map(args.map)
    summary = run(cfg, world)
    _progress(
        args,
        f"run complete: {summary.agents} agents x {summary.ticks} ticks, "
        f"init {summary.init_seconds:.2f}s, sim {summary.sim_seconds:.2f}s -> {cfg.out}",
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    from .engine import bench, render_bench_table
    from .worldmap import load_map

    cfg = load_config(args.config, _parse_sets(args.set))
    world = load_map(args.map)
    agent_counts = [int(s) for s in args.agents.split(",") if s]
    variants = [s.strip() for s in args.modes.split(",") if s.strip()]
    os.makedirs(args.out, exist_ok=True)
    rows = bench(world, cfg, agent_counts, variants, args.ticks, args.out)
    table = render_bench_table(rows)
    table_path = os.path.join(args.out, "bench.tsv")
    with open(table_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(table)
    _progress(args, f"benchmark table -> {table_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from . import fleet

    man = fleet.parse_manifest(args.manifest)
    if args.workers is not None:
        man.workers = args.workers
    if args.mode is not None:
        man.mode = args.mode
    fleet.validate_manifest(man)
    _progress(args, f"sweep: {len(man.jobs)} jobs, mode={man.mode}, workers={man.workers}")
    if man.mode == "queue":
        statuses = fleet.run_queue(man)
    else:
        statuses = fleet.run_forkjoin(man)
    for status in statuses:
        _progress(args, f"  {status.job_id}: {status.state} ({status.wall_seconds:.2f}s)")
    if args.collect:
        fleet.collect(man, args.collect)
        _progress(args, f"merged dataset -> {args.collect}")
    all_done = all(s.state == "done" for s in statuses)
    return EXIT_OK if all_done else EXIT_RUNTIME


def cmd_logs(args) -> int:
    from . import logio

    if args.logs_command == "concat":
        run_dirs = [d for d in args.runs.split(",") if d]
        merged = logio.concat_logs(run_dirs, args.out)
        _progress(args, f"merged {len(run_dirs)} runs: {', '.join(sorted(merged))} -> {args.out}")
        return EXIT_OK
    if args.logs_command == "downsample":
        kept = logio.downsample(args.infile, args.out, args.stride)
        _progress(args, f"kept {kept} records -> {args.out}")
        return EXIT_OK
    if args.logs_command == "stats":
        text = logio.stats(args.run, friend_threshold=args.friend_threshold)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.logs_command == "export":
        from .worldmap import load_map

        world = load_map(args.map)
        n = logio.export_geojson(args.traj, world, args.out, stride=args.stride, epoch=args.epoch)
        _progress(args, f"exported {n} agent trajectories -> {args.out}")
        return EXIT_OK
    raise ConfigError("logs needs a subcommand: concat|downsample|stats|export")


def _add_ingest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="ingest RNG seed (economy draws)")
    p.add_argument("--unit-area", type=float, default=100.0, help="m^2 per auto-generated unit")
    p.add_argument("--rent-range", default="1000:3000", help="daily rent range in cents, lo:hi")
    p.add_argument("--wage-range", default="40:80", help="per-tick wage range in cents, lo:hi")
    p.add_argument("--meal-range", default="500:1500", help="meal price range in cents, lo:hi")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress progress output on stderr")

    parser = argparse.ArgumentParser(
        prog="polsim",
        description="Deterministic agent-based human-mobility simulator and fleet orchestrator.",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"polsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a .polmap from GeoJSON layers", parents=[common])
    p.add_argument("--buildings", required=True)
    p.add_argument("--units", default=None, help="optional buildingUnits layer")
    p.add_argument("--walkways", required=True)
    p.add_argument("--out", required=True, help="output .polmap path")
    _add_ingest_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("validate", help="validate a map and print the report", parents=[common])
    p.add_argument("--map", default=None, help=".polmap to validate")
    p.add_argument("--buildings", default=None)
    p.add_argument("--units", default=None)
    p.add_argument("--walkways", default=None)
    p.add_argument("--out", default=None, help="write report here instead of stdout")
    _add_ingest_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth-map", help="generate a synthetic grid city (three GeoJSON layers)", parents=[common])
    p.add_argument("--grid", required=True, help="blocks, e.g. 10x10")
    p.add_argument("--spacing", type=float, default=50.0, help="block spacing in meters")
    p.add_argument("--out", required=True, help="output directory for the layers")
    p.add_argument("--ingest", action="store_true", help="also ingest to map.polmap in the same directory")
    _add_ingest_flags(p)
    p.set_defaults(func=cmd_synth_map)

    p = sub.add_parser("run", help="run one simulation instance", parents=[common])
    p.add_argument("--map", required=True, help=".polmap file")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ticks", type=int, default=None)
    p.add_argument("--agents", type=int, default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="timing grid over agent counts x mode variants", parents=[common])
    p.add_argument("--map", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--agents", default="1000", help="comma-separated agent counts")
    p.add_argument("--modes", default="improved,vanilla", help="comma-separated: improved,vanilla")
    p.add_argument("--ticks", type=int, default=288)
    p.add_argument("--out", required=True, help="directory for per-cell runs and bench.tsv")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="run many simulations from a manifest", parents=[common])
    p.add_argument("--manifest", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--mode", choices=["queue", "forkjoin"], default=None)
    p.add_argument("--collect", default=None, help="merge done-job logs into this directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("logs", help="post-process log files", parents=[common])
    logs_sub = p.add_subparsers(dest="logs_command", required=True)

    q = logs_sub.add_parser("concat", help="merge runs into run_id-prefixed files", parents=[common])
    q.add_argument("--runs", required=True, help="comma-separated run directories")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_logs)

    q = logs_sub.add_parser("downsample", help="keep records with tick %% stride == 0", parents=[common])
    q.add_argument("--in", dest="infile", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--stride", type=int, required=True)
    q.set_defaults(func=cmd_logs)

    q = logs_sub.add_parser("stats", help="summary report over one run directory", parents=[common])
    q.add_argument("--run", required=True)
    q.add_argument("--out", default=None)
    q.add_argument("--friend-threshold", type=float, default=0.3)
    q.set_defaults(func=cmd_logs)

    q = logs_sub.add_parser("export", help="trajectories to GeoJSON (lon/lat)", parents=[common])
    q.add_argument("--traj", required=True, help="trajectory.tsv")
    q.add_argument("--map", required=True, help=".polmap (projection source)")
    q.add_argument("--out", required=True)
    q.add_argument("--stride", type=int, default=1)
    q.add_argument("--epoch", default=None, help="ISO-8601 start time; adds per-point timestamps")
    q.set_defaults(func=cmd_logs)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help/--version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"polsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MapError, ParseError) as exc:
        print(f"polsim: map error: {exc}", file=sys.stderr)
        return EXIT_MAP
    except (RunError, ProcError, RouteError, InitError, OrchestratorError) as exc:
        print(f"polsim: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"polsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
