"""Configuration types, defaults, and the flat key=value config file format."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

CAPABILITIES = "capabilities"
ALLOTMENT = "allotment"
SCENARIOS = (CAPABILITIES, ALLOTMENT)

BASELINE = "baseline"
RAWLE = "rawle"
SOCIETIES = (BASELINE, RAWLE)

# Column used in CSV output for the maximin-shaped society.
SOCIETY_COLUMN = {BASELINE: "baseline", RAWLE: "maximin"}

# Default grid size per scenario (width, height).
GRID_DEFAULTS = {CAPABILITIES: (8, 4), ALLOTMENT: (16, 4)}

# Reward defaults, one column per society: (baseline, rawle).
REWARD_DEFAULTS = {
    "survive_episode": (1.0, 1.0),
    "eat_berry": (1.0, 0.8),
    "forage_hit": (1.0, 0.8),
    "throw_berry": (0.5, 0.5),
    "try_eat_empty": (-0.2, -0.1),
    "try_throw_empty": (-0.2, -0.1),
    "try_throw_low_health": (-0.2, -0.1),
    "try_throw_no_recipient": (-0.2, -0.1),
    "die": (-1.0, -1.0),
    "sanction_magnitude": (0.0, 0.4),
}


class ConfigError(ValueError):
    """Raised for invalid configuration values or files."""


class ContractError(RuntimeError):
    """Raised when an operation is called outside its contract."""


@dataclass(frozen=True)
class RewardTable:
    """Reward schedule for one society type."""

    survive_episode: float
    eat_berry: float
    forage_hit: float
    throw_berry: float
    try_eat_empty: float
    try_throw_empty: float
    try_throw_low_health: float
    try_throw_no_recipient: float
    die: float
    sanction_magnitude: float

    @classmethod
    def for_society(cls, society: str, overrides: dict | None = None) -> "RewardTable":
        if society not in SOCIETIES:
            raise ConfigError(f"unknown society {society!r}")
        col = SOCIETIES.index(society)
        values = {name: default[col] for name, default in REWARD_DEFAULTS.items()}
        for key, value in (overrides or {}).items():
            if key not in values:
                raise ConfigError(f"unknown reward field {key!r}")
            values[key] = float(value)
        return cls(**values)


@dataclass(frozen=True)
class SimConfig:
    """Scenario parameters for one society's simulation."""

    scenario: str = CAPABILITIES
    grid_width: int = 8
    grid_height: int = 4
    n_agents: int = 4
    b_initial: int = 12
    h_initial: float = 5.0
    h_gain: float = 0.1
    h_decay: float = -0.01
    h_throw: float = 0.6
    t_max: int = 50
    seed: int = 0
    society: str = BASELINE
    rewards: RewardTable = field(default_factory=lambda: RewardTable.for_society(BASELINE))
    allotment_profile: tuple[int, ...] = (6, 3, 2, 1)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.society not in SOCIETIES:
            raise ConfigError(f"unknown society {self.society!r}")
        if self.n_agents < 1:
            raise ConfigError("n_agents must be at least 1")
        if self.grid_width < 1 or self.grid_height < 1:
            raise ConfigError("grid dimensions must be positive")
        if self.grid_width * self.grid_height < self.b_initial + self.n_agents:
            raise ConfigError("grid too small to place all agents and berries on distinct cells")
        if self.h_initial <= 0:
            raise ConfigError("h_initial must be positive")
        if self.h_gain <= 0:
            raise ConfigError("h_gain must be positive")
        if self.h_decay >= 0:
            raise ConfigError("h_decay must be negative")
        if self.h_throw <= 0:
            raise ConfigError("h_throw must be positive")
        if self.t_max < 1:
            raise ConfigError("t_max must be at least 1")
        if self.scenario == ALLOTMENT:
            if len(self.allotment_profile) != self.n_agents:
                raise ConfigError("allotment_profile must have one entry per agent")
            if any(c < 0 for c in self.allotment_profile):
                raise ConfigError("allotment_profile entries must be non-negative")
            if sum(self.allotment_profile) != self.b_initial:
                raise ConfigError("allotment_profile must sum to b_initial")
            if self.grid_width < self.n_agents:
                raise ConfigError("allotment grid needs at least one column per agent")

    @property
    def spawn_wellbeing(self) -> float:
        """Well-being of a fresh agent: full health, empty bag."""
        return self.h_initial / abs(self.h_decay)


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters of the per-agent Q-learner."""

    batch_size: int = 64
    target_sync_period: int = 50
    epsilon_start: float = 0.9
    epsilon_final: float = 0.0
    learning_rate: float = 0.0001
    discount: float = 0.99
    replay_capacity: int = 10_000
    hidden_units: int = 128
    huber_delta: float = 1.0
    optimizer: str = "sgd"

    def __post_init__(self):
        if not 0.0 <= self.epsilon_start <= 1.0 or not 0.0 <= self.epsilon_final <= 1.0:
            raise ConfigError("epsilon values must lie in [0, 1]")
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError("discount must lie in (0, 1]")
        if self.batch_size < 1 or self.batch_size > self.replay_capacity:
            raise ConfigError("batch_size must be in [1, replay_capacity]")
        if self.target_sync_period < 1:
            raise ConfigError("target_sync_period must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.hidden_units < 1:
            raise ConfigError("hidden_units must be at least 1")
        if self.huber_delta <= 0:
            raise ConfigError("huber_delta must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class EthicsConfig:
    """Switches for the self-directed sanction."""

    penalise_worsened_min: bool = True
    penalise_missed_improvement: bool = True
    sanction_during_eval: bool = True


@dataclass(frozen=True)
class NormConfig:
    """Behaviour-mining parameters."""

    decay_rate: float = 0.99
    max_behaviours: int = 50
    clip_behaviours_every: int = 10
    clip_norms_every: int = 5
    convergence_threshold: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.decay_rate <= 1.0:
            raise ConfigError("decay_rate must lie in (0, 1]")
        if self.max_behaviours < 1:
            raise ConfigError("max_behaviours must be at least 1")
        if self.clip_behaviours_every < 1 or self.clip_norms_every < 1:
            raise ConfigError("clip periods must be at least 1")
        if not 0.0 < self.convergence_threshold <= 1.0:
            raise ConfigError("convergence_threshold must lie in (0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full harness configuration: scenario, societies, budgets, seeds."""

    scenario: str = CAPABILITIES
    society: str = "both"
    train_episodes: int = 500
    eval_episodes: int = 2000
    n_seeds: int = 1
    seed: int = 0
    sim_overrides: dict = field(default_factory=dict)
    reward_overrides: dict = field(default_factory=dict)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    ethics: EthicsConfig = field(default_factory=EthicsConfig)
    norms: NormConfig = field(default_factory=NormConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.society not in SOCIETIES + ("both",):
            raise ConfigError(f"unknown society {self.society!r}")
        if self.train_episodes < 0 or self.eval_episodes < 1:
            raise ConfigError("need train_episodes >= 0 and eval_episodes >= 1")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")

    def societies(self) -> tuple[str, ...]:
        return SOCIETIES if self.society == "both" else (self.society,)

    def sim_config(self, society: str) -> SimConfig:
        width, height = GRID_DEFAULTS[self.scenario]
        values = {
            "scenario": self.scenario,
            "grid_width": width,
            "grid_height": height,
            "seed": self.seed,
            "society": society,
            "rewards": RewardTable.for_society(society, self.reward_overrides.get(society)),
        }
        values.update(self.sim_overrides)
        return SimConfig(**values)


# Config file keys, grouped by the dataclass they feed. Reward keys are
# reward_<society>_<field>, e.g. reward_rawle_eat_berry.
_TOP_KEYS = {
    "scenario": str,
    "society": str,
    "train_episodes": int,
    "eval_episodes": int,
    "n_seeds": int,
    "seed": int,
}
_SIM_KEYS = {
    "grid_width": int,
    "grid_height": int,
    "n_agents": int,
    "b_initial": int,
    "h_initial": float,
    "h_gain": float,
    "h_decay": float,
    "h_throw": float,
    "t_max": int,
    "allotment_profile": "int_tuple",
}
_LEARNER_KEYS = {
    "batch_size": int,
    "target_sync_period": int,
    "epsilon_start": float,
    "epsilon_final": float,
    "learning_rate": float,
    "discount": float,
    "replay_capacity": int,
    "hidden_units": int,
    "huber_delta": float,
    "optimizer": str,
}
_ETHICS_KEYS = {
    "penalise_worsened_min": bool,
    "penalise_missed_improvement": bool,
    "sanction_during_eval": bool,
}
_NORM_KEYS = {
    "norm_decay_rate": ("decay_rate", float),
    "max_behaviours": ("max_behaviours", int),
    "clip_behaviours_every": ("clip_behaviours_every", int),
    "clip_norms_every": ("clip_norms_every", int),
    "convergence_threshold": ("convergence_threshold", float),
}


def _coerce(key: str, raw: str, kind):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind == "int_tuple":
            return tuple(int(part) for part in raw.replace(",", " ").split())
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_file(path: str | Path) -> dict:
    """Parse a flat `key = value` file (# comments, blank lines allowed)."""
    mapping = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in mapping:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        mapping[key] = raw
    return mapping


def build_experiment_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Turn flat string key/values (file plus CLI overrides) into configs."""
    merged = dict(raw)
    merged.update(overrides or {})

    top, sim, learner, ethics, norms, rewards = {}, {}, {}, {}, {}, {}
    for key, raw_value in merged.items():
        if raw_value is None:
            continue
        if key in _TOP_KEYS:
            top[key] = raw_value if not isinstance(raw_value, str) else _coerce(key, raw_value, _TOP_KEYS[key])
        elif key in _SIM_KEYS:
            sim[key] = raw_value if not isinstance(raw_value, str) else _coerce(key, raw_value, _SIM_KEYS[key])
        elif key in _LEARNER_KEYS:
            learner[key] = raw_value if not isinstance(raw_value, str) else _coerce(key, raw_value, _LEARNER_KEYS[key])
        elif key in _ETHICS_KEYS:
            ethics[key] = raw_value if not isinstance(raw_value, str) else _coerce(key, raw_value, _ETHICS_KEYS[key])
        elif key in _NORM_KEYS:
            name, kind = _NORM_KEYS[key]
            norms[name] = raw_value if not isinstance(raw_value, str) else _coerce(key, raw_value, kind)
        elif key.startswith("reward_"):
            remainder = key[len("reward_"):]
            society, _, fieldname = remainder.partition("_")
            if society not in SOCIETIES or fieldname not in REWARD_DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            rewards.setdefault(society, {})[fieldname] = _coerce(key, str(raw_value), float)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    return ExperimentConfig(
        **top,
        sim_overrides=sim,
        reward_overrides=rewards,
        learner=LearnerConfig(**learner),
        ethics=EthicsConfig(**ethics),
        norms=NormConfig(**norms),
    )


def load_experiment_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    raw = parse_config_file(path) if path else {}
    return build_experiment_config(raw, overrides)
