"""Run configuration: flat ``key = value`` text files with strict key checking.

Unknown keys are rejected so sweep generators fail loudly instead of silently
running defaults. ``#`` starts a comment; blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError

TICK_SECONDS = 300  # five-minute tick
TICKS_PER_DAY = 86400 // TICK_SECONDS

REEVAL_DAILY = "daily"
REEVAL_PER_TICK = "per_tick"
POI_EUCLIDEAN = "euclidean"
POI_NETWORK = "network"


@dataclass
class SimConfig:
    seed: int = 0
    agents: int = 100
    ticks: int = TICKS_PER_DAY
    out: str = ""
    reevaluation: str = REEVAL_DAILY
    poi_selection: str = POI_EUCLIDEAN

    initial_balance_cents: int = 50_000
    walk_speed_mps: float = 1.4

    log_trajectory: bool = True
    log_checkin: bool = True
    log_state: bool = True
    log_social: bool = True
    log_state_stride: int = 1

    needs_hunger_decay: float = 0.004
    needs_energy_decay: float = 0.003
    needs_social_decay: float = 0.002
    needs_hunger_threshold: float = 0.3
    needs_energy_threshold: float = 0.3
    needs_social_threshold: float = 0.3
    needs_sleep_restore: float = 0.01
    needs_social_restore: float = 0.02

    schedule_work_start_hour: int = 9
    schedule_work_end_hour: int = 17
    schedule_sleep_start_hour: int = 22
    schedule_sleep_end_hour: int = 6
    schedule_reeval_hour: int = 4

    finance_k_reserve: float = 2.0
    finance_k_crisis: float = 1.0
    finance_m_sample: int = 10

    social_delta_meet: float = 0.05
    social_lambda_decay: float = 0.01
    social_friend_threshold: float = 0.3
    social_prune_epsilon: float = 0.001

    def validate(self) -> None:
        if self.agents < 1:
            raise ConfigError("agents must be >= 1")
        if self.ticks < 1:
            raise ConfigError("ticks must be >= 1")
        if self.reevaluation not in (REEVAL_DAILY, REEVAL_PER_TICK):
            raise ConfigError(f"reevaluation must be daily|per_tick, got {self.reevaluation!r}")
        if self.poi_selection not in (POI_EUCLIDEAN, POI_NETWORK):
            raise ConfigError(f"poi_selection must be euclidean|network, got {self.poi_selection!r}")
        if self.log_state_stride < 1:
            raise ConfigError("log.state_stride must be >= 1")
        if self.walk_speed_mps <= 0:
            raise ConfigError("walk_speed_mps must be positive")
        for name in (
            "needs_hunger_decay",
            "needs_energy_decay",
            "needs_social_decay",
            "needs_sleep_restore",
            "needs_social_restore",
            "social_delta_meet",
            "social_lambda_decay",
            "social_prune_epsilon",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{_ATTR_TO_KEY[name]} must be >= 0")
        for name in (
            "schedule_work_start_hour",
            "schedule_work_end_hour",
            "schedule_sleep_start_hour",
            "schedule_sleep_end_hour",
            "schedule_reeval_hour",
        ):
            hour = getattr(self, name)
            if not 0 <= hour <= 24:
                raise ConfigError(f"{_ATTR_TO_KEY[name]} must be within 0..24")
        if self.finance_m_sample < 1:
            raise ConfigError("finance.m_sample must be >= 1")


# Config-file key <-> dataclass attribute. Dots namespace related keys.
_KEY_TO_ATTR = {
    "seed": "seed",
    "agents": "agents",
    "ticks": "ticks",
    "out": "out",
    "reevaluation": "reevaluation",
    "poi_selection": "poi_selection",
    "initial_balance_cents": "initial_balance_cents",
    "walk_speed_mps": "walk_speed_mps",
    "log.trajectory": "log_trajectory",
    "log.checkin": "log_checkin",
    "log.state": "log_state",
    "log.social": "log_social",
    "log.state_stride": "log_state_stride",
    "needs.hunger_decay": "needs_hunger_decay",
    "needs.energy_decay": "needs_energy_decay",
    "needs.social_decay": "needs_social_decay",
    "needs.hunger_threshold": "needs_hunger_threshold",
    "needs.energy_threshold": "needs_energy_threshold",
    "needs.social_threshold": "needs_social_threshold",
    "needs.sleep_restore": "needs_sleep_restore",
    "needs.social_restore": "needs_social_restore",
    "schedule.work_start_hour": "schedule_work_start_hour",
    "schedule.work_end_hour": "schedule_work_end_hour",
    "schedule.sleep_start_hour": "schedule_sleep_start_hour",
    "schedule.sleep_end_hour": "schedule_sleep_end_hour",
    "schedule.reeval_hour": "schedule_reeval_hour",
    "finance.k_reserve": "finance_k_reserve",
    "finance.k_crisis": "finance_k_crisis",
    "finance.m_sample": "finance_m_sample",
    "social.delta_meet": "social_delta_meet",
    "social.lambda_decay": "social_lambda_decay",
    "social.friend_threshold": "social_friend_threshold",
    "social.prune_epsilon": "social_prune_epsilon",
}
_ATTR_TO_KEY = {v: k for k, v in _KEY_TO_ATTR.items()}

_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _coerce(key: str, attr: str, raw: str):
    ftype = _FIELD_TYPES[attr]
    raw = raw.strip()
    if ftype == "bool":
        lowered = raw.lower()
        if lowered in ("on", "true", "yes", "1"):
            return True
        if lowered in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected on/off, got {raw!r}")
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {ftype}, got {raw!r}") from exc
    return raw


def parse_kv_lines(text: str, source: str = "<config>") -> list[tuple[str, str]]:
    """Parse ``key = value`` lines, preserving order; comments stripped."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = stripped.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def apply_overrides(cfg: SimConfig, pairs: list[tuple[str, str]], source: str = "<config>") -> SimConfig:
    for key, value in pairs:
        attr = _KEY_TO_ATTR.get(key)
        if attr is None:
            raise ConfigError(f"{source}: unknown config key {key!r}")
        setattr(cfg, attr, _coerce(key, attr, value))
    return cfg


def load_config(path: str | None, overrides: list[tuple[str, str]] | None = None) -> SimConfig:
    """Defaults, then the config file, then explicit overrides; validated."""
    cfg = SimConfig()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        apply_overrides(cfg, parse_kv_lines(text, source=path), source=path)
    if overrides:
        apply_overrides(cfg, overrides, source="<override>")
    cfg.validate()
    return cfg


def render_config(cfg: SimConfig) -> str:
    """Config as canonical key = value text (registry order)."""
    lines = []
    for key, attr in _KEY_TO_ATTR.items():
        value = getattr(cfg, attr)
        if isinstance(value, bool):
            value = "on" if value else "off"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
