"""Log record schemas, buffered writers, and post-processing.

All logs are TSV with LF line endings and UTF-8 text. The first line is a
header: the schema tag followed by the column names, tab-separated. Floats
are always printed with 6 decimals and no exponent, integers in base 10, so
parse -> emit round-trips byte-identically.

Schemas:
  poltraj/1   tick agent x y status
  polchk/1    tick agent unit building kind x y
  polstate/1  tick agent hunger energy social balance_cents mode
  polsoc/1    day agent_a agent_b weight

Merged (multi-run) files carry the same tag with a leading ``run_id`` column.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime, timedelta

from .config import TICK_SECONDS, TICKS_PER_DAY
from .errors import ProcError, RunError

FLUSH_EVERY = 10_000


@dataclass(frozen=True)
class Schema:
    name: str
    tag: str
    filename: str
    columns: tuple[str, ...]
    # indexes of int / float columns for typed parsing
    int_cols: tuple[int, ...]
    float_cols: tuple[int, ...]


SCHEMAS = {
    "trajectory": Schema(
        "trajectory", "poltraj/1", "trajectory.tsv", ("tick", "agent", "x", "y", "status"), (0, 1), (2, 3)
    ),
    "checkin": Schema(
        "checkin", "polchk/1", "checkin.tsv", ("tick", "agent", "unit", "building", "kind", "x", "y"),
        (0, 1, 2, 3), (5, 6),
    ),
    "state": Schema(
        "state", "polstate/1", "state.tsv",
        ("tick", "agent", "hunger", "energy", "social", "balance_cents", "mode"), (0, 1, 5), (2, 3, 4),
    ),
    "social": Schema("social", "polsoc/1", "social.tsv", ("day", "agent_a", "agent_b", "weight"), (0, 1, 2), (3,)),
}


def header_line(schema: Schema, merged: bool = False) -> str:
    cols = ("run_id",) + schema.columns if merged else schema.columns
    return schema.tag + "\t" + "\t".join(cols) + "\n"


class LogWriter:
    """Buffered line writer: flushes every FLUSH_EVERY records and on close."""

    def __init__(self, path: str, schema: Schema, flush_every: int = FLUSH_EVERY):
        self.path = path
        self.schema = schema
        self.count = 0
        self.flush_every = flush_every
        self._buf: list[str] = []
        self._f = open(path, "w", encoding="utf-8", newline="\n")
        self._f.write(header_line(schema))

    def append(self, line: str) -> None:
        self._buf.append(line)
        self.count += 1
        if len(self._buf) >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if self._buf:
            self._f.write("".join(self._buf))
            self._buf.clear()
        self._f.flush()

    def close(self) -> None:
        self.flush()
        self._f.close()

    def abandon(self) -> None:
        """Close the handle without trying to flush (failure path)."""
        try:
            self._f.close()
        except OSError:
            pass


def open_writer(name: str, out_dir: str) -> LogWriter:
    schema = SCHEMAS[name]
    return LogWriter(os.path.join(out_dir, schema.filename), schema)


def write_records(sink: LogWriter, lines) -> int:
    """Append pre-formatted record lines; returns how many were written."""
    n = 0
    for line in lines:
        sink.append(line)
        n += 1
    return n


# ---------------------------------------------------------------------------
# Formatting / parsing
# ---------------------------------------------------------------------------


def format_trajectory(tick: int, agent: int, x: float, y: float, status: str) -> str:
    return f"{tick}\t{agent}\t{x:.6f}\t{y:.6f}\t{status}\n"


def format_checkin(tick: int, agent: int, unit: int, building: int, kind: str, x: float, y: float) -> str:
    return f"{tick}\t{agent}\t{unit}\t{building}\t{kind}\t{x:.6f}\t{y:.6f}\n"


def format_state(tick: int, agent: int, hunger: float, energy: float, social: float, balance: int, mode: str) -> str:
    return f"{tick}\t{agent}\t{hunger:.6f}\t{energy:.6f}\t{social:.6f}\t{balance}\t{mode}\n"


def format_social(day: int, agent_a: int, agent_b: int, weight: float) -> str:
    return f"{day}\t{agent_a}\t{agent_b}\t{weight:.6f}\n"


_FORMATTERS = {
    "trajectory": format_trajectory,
    "checkin": format_checkin,
    "state": format_state,
    "social": format_social,
}


def format_record(name: str, record: tuple) -> str:
    return _FORMATTERS[name](*record)


def read_header(path: str) -> tuple[Schema, bool]:
    """Identify (schema, merged?) from a log file's header line."""
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    fields = first.rstrip("\n").split("\t")
    for schema in SCHEMAS.values():
        if fields and fields[0] == schema.tag:
            merged = len(fields) > 1 and fields[1] == "run_id"
            return schema, merged
    raise ProcError(f"{path}: unknown log schema {fields[0] if fields else ''!r}")


def parse_log(path: str) -> tuple[Schema, list[tuple]]:
    """Typed records from a (non-merged) log file."""
    schema, merged = read_header(path)
    if merged:
        raise ProcError(f"{path}: expected a single-run log, found merged file")
    records: list[tuple] = []
    ints = set(schema.int_cols)
    floats = set(schema.float_cols)
    with open(path, encoding="utf-8") as f:
        next(f)
        for line in f:
            parts = line.rstrip("\n").split("\t")
            rec = tuple(
                int(v) if i in ints else (float(v) if i in floats else v) for i, v in enumerate(parts)
            )
            records.append(rec)
    return schema, records


def emit_log(schema_name: str, records: list[tuple]) -> str:
    """Full log text (header + lines) for the given records."""
    schema = SCHEMAS[schema_name]
    return header_line(schema) + "".join(format_record(schema_name, r) for r in records)


# ---------------------------------------------------------------------------
# Post-processing
# ---------------------------------------------------------------------------


def concat_logs(run_dirs: list[str], out_dir: str, run_ids: list[str] | None = None) -> dict[str, str]:
    """Merge per-run logs into one file per record type with a run_id column.

    Runs appear in input (manifest) order; a run missing a log type simply
    contributes no lines. Returns {type name: merged path}.
    """
    if run_ids is None:
        run_ids = [os.path.basename(os.path.normpath(d)) for d in run_dirs]
    if len(run_ids) != len(run_dirs):
        raise ProcError("run_ids and run_dirs length mismatch")
    os.makedirs(out_dir, exist_ok=True)
    merged: dict[str, str] = {}
    for name, schema in SCHEMAS.items():
        sources = []
        for run_id, run_dir in zip(run_ids, run_dirs):
            path = os.path.join(run_dir, schema.filename)
            if os.path.exists(path):
                sources.append((run_id, path))
        if not sources:
            continue
        out_path = os.path.join(out_dir, schema.filename)
        with open(out_path, "w", encoding="utf-8", newline="\n") as out:
            out.write(header_line(schema, merged=True))
            for run_id, path in sources:
                with open(path, encoding="utf-8") as f:
                    first = f.readline().rstrip("\n").split("\t")
                    if not first or first[0] != schema.tag:
                        raise ProcError(
                            f"run {run_id!r}: schema mismatch in {path} "
                            f"(found {first[0] if first else ''!r}, expected {schema.tag!r})"
                        )
                    for line in f:
                        out.write(run_id + "\t" + line)
        merged[name] = out_path
    return merged


def split_merged(merged_path: str, out_dir: str) -> dict[str, str]:
    """Inverse of concat: per-run files reconstructed from a merged log."""
    schema, merged = read_header(merged_path)
    if not merged:
        raise ProcError(f"{merged_path}: not a merged log")
    handles: dict[str, object] = {}
    os.makedirs(out_dir, exist_ok=True)
    try:
        with open(merged_path, encoding="utf-8") as f:
            next(f)
            for line in f:
                run_id, rest = line.split("\t", 1)
                h = handles.get(run_id)
                if h is None:
                    run_sub = os.path.join(out_dir, run_id)
                    os.makedirs(run_sub, exist_ok=True)
                    h = open(os.path.join(run_sub, schema.filename), "w", encoding="utf-8", newline="\n")
                    h.write(header_line(schema))
                    handles[run_id] = h
                h.write(rest)
    finally:
        for h in handles.values():
            h.close()
    return {run_id: os.path.join(out_dir, run_id, schema.filename) for run_id in handles}


def downsample(in_path: str, out_path: str, stride: int) -> int:
    """Keep records whose tick (first column) is divisible by ``stride``."""
    if stride < 1:
        raise ProcError("stride must be >= 1")
    schema, merged = read_header(in_path)
    kept = 0
    tick_field = 1 if merged else 0
    with open(in_path, encoding="utf-8") as f, open(out_path, "w", encoding="utf-8", newline="\n") as out:
        out.write(f.readline())
        for line in f:
            tick = int(line.split("\t", tick_field + 1)[tick_field])
            if tick % stride == 0:
                out.write(line)
                kept += 1
    return kept


def stats(run_dir: str, friend_threshold: float = 0.3) -> str:
    """Text report over one run directory (polstats/1).

    The degree histogram counts last-day edges at or above
    ``friend_threshold`` (pass the run's configured threshold if it differs
    from the default).
    """
    from .social import SocialGraph

    paths = {name: os.path.join(run_dir, schema.filename) for name, schema in SCHEMAS.items()}
    if not os.path.isdir(run_dir):
        raise ProcError(f"run directory {run_dir} does not exist")

    counts = {name: 0 for name in SCHEMAS}
    agents_seen: set[int] = set()
    max_tick = 0

    # check-ins per (agent, day) drive the trips metric
    checkins: dict[tuple[int, int], int] = {}
    if os.path.exists(paths["checkin"]):
        with open(paths["checkin"], encoding="utf-8") as f:
            next(f)
            for line in f:
                parts = line.split("\t", 3)
                tick = int(parts[0])
                agent = int(parts[1])
                counts["checkin"] += 1
                agents_seen.add(agent)
                max_tick = max(max_tick, tick)
                key = (agent, tick // TICKS_PER_DAY)
                checkins[key] = checkins.get(key, 0) + 1

    balance_by_day: dict[int, tuple[int, int]] = {}
    if os.path.exists(paths["state"]):
        with open(paths["state"], encoding="utf-8") as f:
            next(f)
            for line in f:
                parts = line.rstrip("\n").split("\t")
                tick = int(parts[0])
                agents_seen.add(int(parts[1]))
                counts["state"] += 1
                max_tick = max(max_tick, tick)
                day = tick // TICKS_PER_DAY
                total, n = balance_by_day.get(day, (0, 0))
                balance_by_day[day] = (total + int(parts[5]), n + 1)

    if os.path.exists(paths["trajectory"]):
        with open(paths["trajectory"], encoding="utf-8") as f:
            next(f)
            for line in f:
                parts = line.split("\t", 2)
                counts["trajectory"] += 1
                agents_seen.add(int(parts[1]))
                max_tick = max(max_tick, int(parts[0]))

    graph = SocialGraph()
    last_day_edges = 0
    if os.path.exists(paths["social"]):
        schema, records = parse_log(paths["social"])
        counts["social"] = len(records)
        if records:
            last_day = max(r[0] for r in records)
            for day, a, b, w in records:
                if day == last_day:
                    graph._set(a, b, w)
                    last_day_edges += 1

    n_agents = len(agents_seen)
    n_days = max_tick // TICKS_PER_DAY + 1 if max_tick > 0 else 0
    total_trips = 0
    if n_agents and n_days:
        for agent in agents_seen:
            for day in range(n_days):
                c = checkins.get((agent, day), 0)
                if c > 1:
                    total_trips += c - 1
        mean_trips = total_trips / (n_agents * n_days)
    else:
        mean_trips = 0.0

    # Friend-degree histogram over the final logged day.
    hist = graph.degree_histogram(n_agents, friend_threshold) if n_agents else []
    hist_text = ",".join(f"{d}:{c}" for d, c in hist) or "-"
    balance_text = (
        ",".join(f"{day}:{total / n:.2f}" for day, (total, n) in sorted(balance_by_day.items())) or "-"
    )

    lines = [
        "polstats/1",
        f"records.trajectory = {counts['trajectory']}",
        f"records.checkin = {counts['checkin']}",
        f"records.state = {counts['state']}",
        f"records.social = {counts['social']}",
        f"distinct_agents = {n_agents}",
        f"days = {n_days}",
        f"mean_trips_per_agent_per_day = {mean_trips:.6f}",
        f"final_day_social_edges = {last_day_edges}",
        f"social_degree_histogram = {hist_text}",
        f"mean_balance_cents_by_day = {balance_text}",
    ]
    return "\n".join(lines) + "\n"


def export_geojson(
    traj_path: str,
    world,
    out_path: str,
    stride: int = 1,
    epoch: str | None = None,
) -> int:
    """Trajectories as one lon/lat LineString per agent; returns feature count.

    ``epoch`` (ISO-8601 datetime) adds a ``times`` property converting ticks
    to human-readable timestamps.
    """
    if stride < 1:
        raise ProcError("stride must be >= 1")
    schema, records = parse_log(traj_path)
    if schema.name != "trajectory":
        raise ProcError(f"{traj_path}: expected a trajectory log, found {schema.tag}")
    start = None
    if epoch is not None:
        try:
            start = datetime.fromisoformat(epoch)
        except ValueError as exc:
            raise ProcError(f"bad --epoch value {epoch!r}: {exc}") from exc

    by_agent: dict[int, list[tuple[int, float, float]]] = {}
    for tick, agent, x, y, _status in records:
        if tick % stride != 0:
            continue
        by_agent.setdefault(agent, []).append((tick, x, y))

    features = []
    for agent in sorted(by_agent):
        pts = by_agent[agent]
        coords = [list(world.projection.to_lonlat(x, y)) for _, x, y in pts]
        props: dict = {"agent": agent}
        if start is not None:
            props["times"] = [(start + timedelta(seconds=t * TICK_SECONDS)).isoformat() for t, _, _ in pts]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": props,
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    try:
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(doc, f, separators=(",", ":"))
            f.write("\n")
    except OSError as exc:
        raise RunError(f"cannot write {out_path}: {exc}") from exc
    return len(features)
