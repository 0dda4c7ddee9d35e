"""Agent needs, action selection, and the financial ledger.

Action selection is a weighted-deficit rule over three bounded needs
(hunger, energy, social), with hierarchy weights 3/2/1 so physiological
needs dominate, plus schedule defaults (work hours -> work, sleep hours ->
home) and a financial-pressure override that sends a low-balance agent to
work instead of socializing. All money is integer cents so the ledger is
exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .config import SimConfig
from .worldmap import RECREATION, RESIDENTIAL, RESTAURANT, WORKPLACE, WorldMap
from .worldmap import euclidean_nearest_unit, network_nearest_unit

# Action kinds. GO_EAT / GO_SOCIAL carry an explicit target; GO_HOME and
# GO_WORK resolve against the agent's current assignment at decision time so
# a home/job switch changes the action identity.
STAY = 0
GO_HOME = 1
GO_WORK = 2
GO_EAT = 3
GO_SOCIAL = 4

ACTION_TOKENS = {STAY: "stay", GO_HOME: "home", GO_WORK: "work", GO_EAT: "eat", GO_SOCIAL: "social"}

Action = tuple[int, int]  # (kind, target unit id)

WAGE = "wage"
RENT = "rent"
MEAL = "meal"

_NO_EVENTS: tuple = ()


class NeedVector(NamedTuple):
    hunger: float
    energy: float
    social: float


class FinancialEvent(NamedTuple):
    tick: int
    agent: int
    kind: str
    amount: int  # signed cents; wage > 0, rent/meal < 0


@dataclass(slots=True)
class Agent:
    id: int
    home_unit: int
    work_unit: int
    balance: int  # cents; may go negative (debt allowed)
    hunger: float = 1.0
    energy: float = 1.0
    social: float = 1.0
    unit: Optional[int] = None  # set => AtUnit(unit)
    route: object = None  # set => OnRoute
    offset: float = 0.0
    speed: float = 1.4
    last_reeval_day: int = -1
    activity: Action = (STAY, -1)
    home_rent: int = 0  # cached rent_per_day of home_unit
    departed_tick: int = -1  # tick the current route started

    @property
    def needs(self) -> NeedVector:
        return NeedVector(self.hunger, self.energy, self.social)

    @property
    def at_unit(self) -> bool:
        return self.unit is not None


def decay_needs(agent: Agent, cfg: SimConfig, at_home_sleep: bool, with_friend_at_recreation: bool) -> None:
    """Apply one tick of need decay plus any active restore, clamped to [0, 1].

    Hunger only decays here; it snaps back to 1 on a restaurant meal.
    """
    h = agent.hunger - cfg.needs_hunger_decay
    agent.hunger = h if h > 0.0 else 0.0

    e = agent.energy - cfg.needs_energy_decay
    if at_home_sleep:
        e += cfg.needs_sleep_restore
    agent.energy = 0.0 if e < 0.0 else (1.0 if e > 1.0 else e)

    s = agent.social - cfg.needs_social_decay
    if with_friend_at_recreation:
        s += cfg.needs_social_restore
    agent.social = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)


def in_hour_window(hour: int, start: int, end: int) -> bool:
    """Hour membership in [start, end); windows with start > end wrap midnight."""
    if start <= end:
        return start <= hour < end
    return hour >= start or hour < end


def is_work_hours(weekday: int, hour: int, cfg: SimConfig) -> bool:
    return weekday < 5 and in_hour_window(hour, cfg.schedule_work_start_hour, cfg.schedule_work_end_hour)


def is_sleep_hours(hour: int, cfg: SimConfig) -> bool:
    return in_hour_window(hour, cfg.schedule_sleep_start_hour, cfg.schedule_sleep_end_hour)


def choose_action(
    agent: Agent,
    world: WorldMap,
    work_hours: bool,
    sleep_hours: bool,
    cfg: SimConfig,
    friend_hint: Optional[int] = None,
    rng=None,
) -> Action:
    """Pick the next action for an AtUnit agent.

    Deterministic given its inputs; ``rng`` is accepted for policy
    extensions but the default rule draws nothing. ``friend_hint`` is the
    recreation unit where the most friends currently are, if any.
    """
    dh = cfg.needs_hunger_threshold - agent.hunger
    de = cfg.needs_energy_threshold - agent.energy
    ds = cfg.needs_social_threshold - agent.social
    wh = 3.0 * dh if dh > 0.0 else 0.0
    we = 2.0 * de if de > 0.0 else 0.0
    ws = ds if ds > 0.0 else 0.0

    pressure = agent.balance < cfg.finance_k_reserve * agent.home_rent

    if wh > 0.0 and wh >= we and wh >= ws:
        target = _nearest_poi(agent, world, RESTAURANT, cfg)
        if target is None:
            return (STAY, agent.unit)
        return (GO_EAT, target)
    if we > 0.0 and we >= ws:
        return (GO_HOME, agent.home_unit)
    if ws > 0.0:
        if pressure and work_hours:
            return (GO_WORK, agent.work_unit)
        if friend_hint is not None:
            return (GO_SOCIAL, friend_hint)
        target = _nearest_poi(agent, world, RECREATION, cfg)
        if target is None:
            return (STAY, agent.unit)
        return (GO_SOCIAL, target)

    if work_hours:
        return (GO_WORK, agent.work_unit)
    if sleep_hours:
        return (GO_HOME, agent.home_unit)
    return (STAY, agent.unit)


def _nearest_poi(agent: Agent, world: WorldMap, kind: int, cfg: SimConfig) -> Optional[int]:
    if cfg.poi_selection == "network":
        return network_nearest_unit(world, world.anchors[agent.unit], kind)
    found = euclidean_nearest_unit(world, world.unit_location(agent.unit), kind, 1)
    return found[0] if found else None


def daily_reevaluation(agent: Agent, world: WorldMap, day: int, rng, cfg: SimConfig) -> tuple[bool, bool]:
    """Crisis-driven home/job re-evaluation; returns (home_changed, job_changed).

    Only runs the search when the agent cannot cover ``k_crisis`` days of
    rent. Samples ``m_sample`` candidate units per search (uniform, with
    replacement, from the ``reeval`` stream: homes first, then jobs) and
    switches only on a strict improvement. Always stamps ``last_reeval_day``.
    """
    home_changed = job_changed = False
    if agent.balance < cfg.finance_k_crisis * agent.home_rent:
        units = world.units
        res_ids = world.unit_ids_by_kind[RESIDENTIAL]
        best_rent = agent.home_rent
        best_home = None
        for _ in range(cfg.finance_m_sample):
            cand = res_ids[rng.randrange(len(res_ids))]
            rent = units[cand].rent_per_day
            if rent < best_rent or (best_home is not None and rent == best_rent and cand < best_home):
                best_rent = rent
                best_home = cand
        if best_home is not None:
            agent.home_unit = best_home
            agent.home_rent = best_rent
            home_changed = True

        work_ids = world.unit_ids_by_kind[WORKPLACE]
        current_wage = units[agent.work_unit].wage_per_tick
        best_wage = current_wage
        best_work = None
        for _ in range(cfg.finance_m_sample):
            cand = work_ids[rng.randrange(len(work_ids))]
            wage = units[cand].wage_per_tick
            if wage > best_wage or (best_work is not None and wage == best_wage and cand < best_work):
                best_wage = wage
                best_work = cand
        if best_work is not None:
            agent.work_unit = best_work
            job_changed = True
    agent.last_reeval_day = day
    return home_changed, job_changed


def apply_financial_tick(agent: Agent, world: WorldMap, tick: int, work_hours: bool, midnight: bool, cfg: SimConfig):
    """Wage while at work during work hours; rent on each midnight crossing.

    Returns the (possibly empty) list of FinancialEvents; balance is updated
    in place. Meals are charged by the engine on restaurant arrival.
    """
    events = _NO_EVENTS
    if work_hours and agent.unit == agent.work_unit:
        wage = world.units[agent.work_unit].wage_per_tick
        agent.balance += wage
        events = [FinancialEvent(tick, agent.id, WAGE, wage)]
    if midnight:
        rent = agent.home_rent
        agent.balance -= rent
        ev = FinancialEvent(tick, agent.id, RENT, -rent)
        events = [*events, ev] if events else [ev]
    return events


def apply_meal(agent: Agent, world: WorldMap, unit_id: int, tick: int) -> FinancialEvent:
    """Charge a restaurant meal and fully restore hunger."""
    price = world.units[unit_id].meal_price
    agent.balance -= price
    agent.hunger = 1.0
    return FinancialEvent(tick, agent.id, MEAL, -price)
