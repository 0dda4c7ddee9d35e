"""Deterministic single-threaded simulation engine.

One run = one SimState driven through a fixed tick loop. Each tick executes
these phases, each iterating agents in ascending id (this order is normative;
reordering is a format-breaking change):

  1. clock advance
  2. need decay (sleep restore at home, social restore with a co-located
     friend at a recreation unit, judged on pre-movement positions)
  3. home/job re-evaluation when due (hourly gate in daily mode, every tick
     in per_tick mode)
  4. decisions: every idle AtUnit agent re-chooses; a changed action with a
     different target starts travel (freshly departed agents first move next
     tick, so one tick never combines a departure teleport with road travel
     plus an arrival teleport)
  5. movement for OnRoute agents; arrivals emit check-ins and apply arrival
     effects (restaurant meal, recreation group join)
  6. financial tick (wage, rent at each midnight crossing)
  7. social: co-location edge building from post-movement recreation groups;
     daily decay at each midnight crossing
  8. record emission (trajectory, state, daily social edge snapshot)

Randomness comes only from named SplitMix64 streams; logging draws nothing,
so toggling logs never changes behavior.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

from . import logio
from .config import TICK_SECONDS, TICKS_PER_DAY, REEVAL_PER_TICK, SimConfig
from .errors import InitError, RunError
from .mobility import RouteCache, advance, begin_travel, position_of
from .needs import (
    ACTION_TOKENS,
    Agent,
    STAY,
    apply_financial_tick,
    apply_meal,
    choose_action,
    daily_reevaluation,
    decay_needs,
    is_sleep_hours,
    is_work_hours,
)
from .rng import derive_stream
from .social import SocialGraph
from .worldmap import ALL_KINDS, KIND_NAMES, RECREATION, RESIDENTIAL, RESTAURANT, WORKPLACE, WorldMap


class SimClock:
    """Tick counter with exact integer-derived calendar fields.

    Tick 0 is Monday 00:00; one tick is 300 seconds. ``midnight`` is true on
    ticks that land exactly on a later midnight (the rent/decay boundary).
    """

    __slots__ = ("tick", "day", "hour", "weekday", "midnight")

    def __init__(self, tick: int = 0):
        self.tick = tick
        self._derive()

    def _derive(self) -> None:
        seconds = self.tick * TICK_SECONDS
        self.day = seconds // 86400
        self.hour = (seconds % 86400) // 3600
        self.weekday = self.day % 7
        self.midnight = self.tick > 0 and self.tick % TICKS_PER_DAY == 0

    def advance(self) -> None:
        self.tick += 1
        self._derive()


@dataclass
class RunSummary:
    agents: int
    ticks: int
    seed: int
    init_seconds: float = 0.0
    sim_seconds: float = 0.0
    record_counts: dict = field(default_factory=dict)
    social_edges_final: int = 0
    home_changes: int = 0
    job_changes: int = 0

    def render(self) -> str:
        lines = [
            "polsum/1",
            f"agents = {self.agents}",
            f"ticks = {self.ticks}",
            f"seed = {self.seed}",
            f"init_seconds = {self.init_seconds:.6f}",
            f"sim_seconds = {self.sim_seconds:.6f}",
        ]
        for name in ("trajectory", "checkin", "state", "social"):
            lines.append(f"records.{name} = {self.record_counts.get(name, 0)}")
        lines.append(f"social_edges_final = {self.social_edges_final}")
        lines.append(f"home_changes = {self.home_changes}")
        lines.append(f"job_changes = {self.job_changes}")
        return "\n".join(lines) + "\n"


class SimState:
    """Everything owned by one run: clock, agents, social graph, RNG streams, sinks."""

    def __init__(self, cfg: SimConfig, world: WorldMap, agents: list[Agent]):
        self.cfg = cfg
        self.world = world
        self.agents = agents
        self.clock = SimClock()
        self.social = SocialGraph()
        self.streams = {name: derive_stream(cfg.seed, name) for name in ("init", "decide", "reeval", "social")}
        self.route_cache = RouteCache()
        self.writers: dict[str, logio.LogWriter | None] = {
            "trajectory": None,
            "checkin": None,
            "state": None,
            "social": None,
        }
        # Agents currently parked at a recreation unit.
        self.rec_presence: dict[int, set[int]] = {}
        self.agent_rec_unit: dict[int, int] = {}
        self.home_changes = 0
        self.job_changes = 0
        self.financial_hook = None  # callable(FinancialEvent) for tests/analysis
        self.poi_warnings: set[int] = set()


def init_world(cfg: SimConfig, world: WorldMap) -> SimState:
    """Create agents with seeded home/work draws; everything else at rest.

    Draw order (normative for replay): for each agent id ascending, one
    ``init``-stream draw for the home unit index among residential unit ids
    ascending, then one for the work unit among workplace unit ids.
    """
    for kind in ALL_KINDS:
        if not world.unit_ids_by_kind[kind]:
            raise InitError(f"map has no units of kind '{KIND_NAMES[kind]}'")
    res_ids = world.unit_ids_by_kind[RESIDENTIAL]
    work_ids = world.unit_ids_by_kind[WORKPLACE]
    init_stream = derive_stream(cfg.seed, "init")
    agents: list[Agent] = []
    for i in range(cfg.agents):
        home = res_ids[init_stream.randrange(len(res_ids))]
        work = work_ids[init_stream.randrange(len(work_ids))]
        agents.append(
            Agent(
                id=i,
                home_unit=home,
                work_unit=work,
                balance=cfg.initial_balance_cents,
                unit=home,
                speed=cfg.walk_speed_mps,
                home_rent=world.units[home].rent_per_day,
            )
        )
    state = SimState(cfg, world, agents)
    state.streams["init"] = init_stream
    return state


def step(state: SimState) -> None:
    """Advance the simulation by one tick. See module docstring for phases."""
    cfg = state.cfg
    world = state.world
    agents = state.agents
    clock = state.clock
    social = state.social

    clock.advance()
    tick = clock.tick
    work_now = is_work_hours(clock.weekday, clock.hour, cfg)
    sleep_now = is_sleep_hours(clock.hour, cfg)
    midnight = clock.midnight

    # Phase 2: need decay. Social restore applies to agents sharing a
    # recreation unit with at least one friend right now (pre-movement).
    restored: set[int] = set()
    thr = cfg.social_friend_threshold
    for members in state.rec_presence.values():
        if len(members) < 2:
            continue
        for a in members:
            nbrs = social.adj.get(a)
            if not nbrs:
                continue
            for b in members:
                if b != a and nbrs.get(b, 0.0) >= thr:
                    restored.add(a)
                    break
    for agent in agents:
        at_home_sleep = sleep_now and agent.unit == agent.home_unit
        decay_needs(agent, cfg, at_home_sleep, agent.id in restored)

    # Phase 3: re-evaluation.
    per_tick = cfg.reevaluation == REEVAL_PER_TICK
    if per_tick or clock.hour == cfg.schedule_reeval_hour:
        reeval_stream = state.streams["reeval"]
        day = clock.day
        for agent in agents:
            if per_tick or agent.last_reeval_day < day:
                hc, jc = daily_reevaluation(agent, world, day, reeval_stream, cfg)
                if hc:
                    state.home_changes += 1
                if jc:
                    state.job_changes += 1

    # Phase 4: decisions for parked agents.
    arrivals: list[Agent] = []
    rec_presence = state.rec_presence
    agent_rec_unit = state.agent_rec_unit
    social_thr = cfg.needs_social_threshold
    cache = state.route_cache
    for agent in agents:
        unit = agent.unit
        if unit is None:
            continue
        hint = None
        if agent.social < social_thr and social.adj.get(agent.id):
            hint = social.meeting_hint(agent.id, agent_rec_unit, thr)
        desired = choose_action(agent, world, work_now, sleep_now, cfg, hint)
        if desired == agent.activity:
            continue
        agent.activity = desired
        target = desired[1]
        if target == unit or desired[0] == STAY:
            continue
        group = rec_presence.get(unit)
        if group is not None:
            group.discard(agent.id)
            agent_rec_unit.pop(agent.id, None)
        if begin_travel(agent, world, target, cache):
            arrivals.append(agent)
        else:
            agent.departed_tick = tick

    # Phase 5: movement and arrivals.
    for agent in agents:
        if agent.route is not None and agent.departed_tick != tick:
            if advance(agent, TICK_SECONDS):
                arrivals.append(agent)
    arrivals.sort(key=lambda a: a.id)
    checkin_writer = state.writers["checkin"]
    units = world.units
    for agent in arrivals:
        unit_id = agent.unit
        u = units[unit_id]
        if checkin_writer is not None:
            checkin_writer.append(
                f"{tick}\t{agent.id}\t{unit_id}\t{u.building_id}\t{KIND_NAMES[u.kind]}\t{u.x:.6f}\t{u.y:.6f}\n"
            )
        if u.kind == RESTAURANT:
            ev = apply_meal(agent, world, unit_id, tick)
            if state.financial_hook is not None:
                state.financial_hook(ev)
        elif u.kind == RECREATION:
            rec_presence.setdefault(unit_id, set()).add(agent.id)
            agent_rec_unit[agent.id] = unit_id

    # Phase 6: wages and rent.
    hook = state.financial_hook
    for agent in agents:
        events = apply_financial_tick(agent, world, tick, work_now, midnight, cfg)
        if hook is not None:
            for ev in events:
                hook(ev)

    # Phase 7: co-location edges; daily decay.
    if cfg.social_delta_meet > 0.0:
        groups = {uid: sorted(members) for uid, members in rec_presence.items() if len(members) >= 2}
        if groups:
            social.register_colocation(groups, cfg.social_delta_meet)
    if midnight:
        social.decay(cfg.social_lambda_decay, cfg.social_prune_epsilon)

    # Phase 8: record emission.
    traj_writer = state.writers["trajectory"]
    if traj_writer is not None:
        for agent in agents:
            x, y = position_of(agent, world)
            status = "AtUnit" if agent.unit is not None else "OnRoute"
            traj_writer.append(f"{tick}\t{agent.id}\t{x:.6f}\t{y:.6f}\t{status}\n")
    state_writer = state.writers["state"]
    if state_writer is not None and tick % cfg.log_state_stride == 0:
        for agent in agents:
            token = ACTION_TOKENS[agent.activity[0]]
            mode = token if agent.unit is not None else f"travel_{token}"
            state_writer.append(
                f"{tick}\t{agent.id}\t{agent.hunger:.6f}\t{agent.energy:.6f}\t{agent.social:.6f}"
                f"\t{agent.balance}\t{mode}\n"
            )
    social_writer = state.writers["social"]
    if social_writer is not None and midnight:
        day_completed = tick // TICKS_PER_DAY - 1
        for a, b, w in social.snapshot():
            social_writer.append(f"{day_completed}\t{a}\t{b}\t{w:.6f}\n")


def run(cfg: SimConfig, world: WorldMap, out_dir: str | None = None) -> RunSummary:
    """Initialize, run ``cfg.ticks`` steps, close sinks, write summary.txt.

    Partial output from a failed run keeps a ``.partial`` marker file in the
    output directory; a clean finish removes it.
    """
    out = out_dir or cfg.out
    if not out:
        raise RunError("no output directory configured")
    try:
        os.makedirs(out, exist_ok=True)
        marker = os.path.join(out, ".partial")
        with open(marker, "w", encoding="utf-8") as f:
            f.write("run in progress\n")
    except OSError as exc:
        raise RunError(f"cannot prepare output directory {out}: {exc}") from exc

    summary = RunSummary(agents=cfg.agents, ticks=cfg.ticks, seed=cfg.seed)
    t0 = time.perf_counter()
    state = init_world(cfg, world)
    summary.init_seconds = time.perf_counter() - t0

    try:
        for name, enabled in (
            ("trajectory", cfg.log_trajectory),
            ("checkin", cfg.log_checkin),
            ("state", cfg.log_state),
            ("social", cfg.log_social),
        ):
            if enabled:
                state.writers[name] = logio.open_writer(name, out)
        t1 = time.perf_counter()
        for _ in range(cfg.ticks):
            step(state)
        summary.sim_seconds = time.perf_counter() - t1
    except OSError as exc:
        for writer in state.writers.values():
            if writer is not None:
                writer.abandon()
        raise RunError(f"I/O failure during run: {exc}") from exc
    else:
        try:
            for writer in state.writers.values():
                if writer is not None:
                    writer.close()
            summary.record_counts = {
                name: (writer.count if writer is not None else 0) for name, writer in state.writers.items()
            }
            summary.social_edges_final = len(state.social)
            summary.home_changes = state.home_changes
            summary.job_changes = state.job_changes
            with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8", newline="\n") as f:
                f.write(summary.render())
            os.remove(marker)
        except OSError as exc:
            raise RunError(f"I/O failure finalizing run: {exc}") from exc
    return summary


def bench(
    world: WorldMap,
    base_cfg: SimConfig,
    agent_counts: list[int],
    variants: list[str],
    ticks: int,
    out_dir: str,
) -> list[tuple[int, str, float, float]]:
    """Timing grid over agent counts x mode variants; returns table rows.

    Variants: ``improved`` (daily re-evaluation + euclidean POIs) and
    ``vanilla`` (per-tick re-evaluation + network POIs).
    """
    import copy

    rows = []
    for n in agent_counts:
        for variant in variants:
            cfg = copy.copy(base_cfg)
            cfg.agents = n
            cfg.ticks = ticks
            if variant == "improved":
                cfg.reevaluation = "daily"
                cfg.poi_selection = "euclidean"
            elif variant == "vanilla":
                cfg.reevaluation = "per_tick"
                cfg.poi_selection = "network"
            else:
                raise RunError(f"unknown bench variant {variant!r}")
            cfg.out = os.path.join(out_dir, f"bench_{n}_{variant}")
            summary = run(cfg, world)
            rows.append((n, variant, summary.init_seconds, summary.sim_seconds))
    return rows


def render_bench_table(rows: list[tuple[int, str, float, float]]) -> str:
    lines = ["polbench/1\tagents\tvariant\tinit_seconds\tsim_seconds"]
    for n, variant, init_s, sim_s in rows:
        lines.append(f"{n}\t{variant}\t{init_s:.3f}\t{sim_s:.3f}")
    return "\n".join(lines) + "\n"
