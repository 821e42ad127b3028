"""Harvesting gridworld: state, per-step dynamics, rewards, and observations.

Two scenarios share the same dynamics. In the capabilities scenario berries
grow on the ground or in trees and agents are short or tall; an agent can
only see and harvest the kind its stature reaches. In the allotment scenario
the grid is split into equal-width vertical plots with unequal berry growth
and an agent can only see and harvest berries inside its own plot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ALLOTMENT, CAPABILITIES, ConfigError, ContractError, SimConfig

MOVE_NORTH, MOVE_EAST, MOVE_SOUTH, MOVE_WEST, EAT, THROW = range(6)
N_ACTIONS = 6
ACTION_NAMES = ("north", "east", "south", "west", "eat", "throw")
_MOVE_DELTAS = {
    MOVE_NORTH: (0, 1),
    MOVE_EAST: (1, 0),
    MOVE_SOUTH: (0, -1),
    MOVE_WEST: (-1, 0),
}

# Berry tags: kind in the capabilities scenario, plot id in the allotment one.
GROUND, TREE = 0, 1
TALL, SHORT = "tall", "short"


@dataclass
class AgentState:
    id: int
    pos: tuple[int, int] | None
    health: float
    bag: list[int] = field(default_factory=list)
    alive: bool = True
    trait: str | int = TALL
    berries_eaten: int = 0

    @property
    def bag_count(self) -> int:
        return len(self.bag)


@dataclass
class GridState:
    width: int
    height: int
    berries: dict[tuple[int, int], int]
    agents: list[AgentState]
    step: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)


@dataclass(frozen=True)
class Observation:
    """What one agent sees: own stock plus everyone's well-being."""

    own_health: float
    own_bag: int
    berry_distance: int
    wellbeing: tuple[float, ...]


def allotment_of(x: int, config: SimConfig) -> int:
    """Plot owning column x: equal-width vertical strips, one per agent."""
    k, w = config.n_agents, config.grid_width
    for plot in range(k):
        if x < (plot + 1) * w // k:
            return plot
    return k - 1


def can_harvest(agent: AgentState, tag: int, config: SimConfig) -> bool:
    if config.scenario == CAPABILITIES:
        return tag == (TREE if agent.trait == TALL else GROUND)
    return tag == agent.trait


def wellbeing(agent: AgentState, config: SimConfig) -> float:
    """Days the agent can survive on current health plus bagged berries."""
    if not agent.alive:
        return 0.0
    return (agent.health + agent.bag_count * config.h_gain) / abs(config.h_decay)


def wellbeing_vector(state: GridState, config: SimConfig) -> np.ndarray:
    return np.array([wellbeing(a, config) for a in state.agents], dtype=np.float64)


def _cell(index: int, width: int) -> tuple[int, int]:
    return int(index) % width, int(index) // width


def init_episode(config: SimConfig, rng_seed) -> GridState:
    """Place agents and berries on distinct random cells; fresh health, empty bags."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    w, h, k, b = config.grid_width, config.grid_height, config.n_agents, config.b_initial
    n_cells = w * h

    berries: dict[tuple[int, int], int] = {}
    if config.scenario == CAPABILITIES:
        chosen = rng.choice(n_cells, size=k + b, replace=False)
        agent_cells = [_cell(c, w) for c in chosen[:k]]
        kinds = rng.integers(0, 2, size=b)
        for c, kind in zip(chosen[k:], kinds):
            berries[_cell(c, w)] = int(kind)
        traits: list[str | int] = [TALL if i % 2 == 0 else SHORT for i in range(k)]
    else:
        chosen = rng.choice(n_cells, size=k, replace=False)
        agent_cells = [_cell(c, w) for c in chosen]
        taken = set(agent_cells)
        for plot, count in enumerate(config.allotment_profile):
            free = [
                (x, y)
                for x in range(w)
                for y in range(h)
                if allotment_of(x, config) == plot and (x, y) not in taken
            ]
            if len(free) < count:
                raise ConfigError(f"plot {plot} cannot hold {count} berries")
            for idx in rng.choice(len(free), size=count, replace=False):
                berries[free[int(idx)]] = plot
                taken.add(free[int(idx)])
        traits = list(range(k))

    agents = [
        AgentState(id=i, pos=agent_cells[i], health=config.h_initial, trait=traits[i])
        for i in range(k)
    ]
    return GridState(width=w, height=h, berries=berries, agents=agents, step=0, rng=rng)


def _empty_cells(state: GridState, config: SimConfig, plot: int | None = None) -> list[tuple[int, int]]:
    cells = []
    for x in range(state.width):
        if plot is not None and allotment_of(x, config) != plot:
            continue
        for y in range(state.height):
            if (x, y) not in state.berries:
                cells.append((x, y))
    return cells


def _regrow(state: GridState, eaten_tag: int, config: SimConfig) -> None:
    """Grow a replacement berry: anywhere (capabilities) or in the eaten berry's plot."""
    if config.scenario == CAPABILITIES:
        cells = _empty_cells(state, config)
        tag = None
    else:
        cells = _empty_cells(state, config, plot=eaten_tag)
        tag = eaten_tag
        if not cells:
            cells = _empty_cells(state, config)
            tag = None
    if not cells:
        return
    pos = cells[int(state.rng.integers(len(cells)))]
    if tag is None:
        tag = int(state.rng.integers(0, 2)) if config.scenario == CAPABILITIES else allotment_of(pos[0], config)
    state.berries[pos] = tag


def throw_recipient(state: GridState, agent_id: int, config: SimConfig) -> AgentState | None:
    """The worst-off other living agent (ties broken by lowest id)."""
    best = None
    best_wb = None
    for other in state.agents:
        if other.id == agent_id or not other.alive:
            continue
        wb = wellbeing(other, config)
        if best_wb is None or wb < best_wb:
            best, best_wb = other, wb
    return best


def step_agent(state: GridState, agent_id: int, action: int, config: SimConfig):
    """Apply one agent's action; returns (raw_reward, state, done_for_agent)."""
    if not 0 <= agent_id < len(state.agents):
        raise ContractError(f"unknown agent id {agent_id}")
    agent = state.agents[agent_id]
    if not agent.alive:
        raise ContractError(f"agent {agent_id} is dead and cannot act")
    rw = config.rewards
    reward = 0.0

    if action in _MOVE_DELTAS:
        dx, dy = _MOVE_DELTAS[action]
        x, y = agent.pos
        agent.pos = (
            min(max(x + dx, 0), state.width - 1),
            min(max(y + dy, 0), state.height - 1),
        )
    elif action == EAT:
        if agent.bag:
            tag = agent.bag.pop(0)
            agent.health += config.h_gain
            agent.berries_eaten += 1
            reward += rw.eat_berry
            _regrow(state, tag, config)
        else:
            reward += rw.try_eat_empty
    elif action == THROW:
        if not agent.bag:
            reward += rw.try_throw_empty
        elif agent.health < config.h_throw:
            reward += rw.try_throw_low_health
        else:
            target = throw_recipient(state, agent_id, config)
            if target is None:
                reward += rw.try_throw_no_recipient
            else:
                target.bag.append(agent.bag.pop(0))
                reward += rw.throw_berry
    else:
        raise ContractError(f"unknown action {action}")

    # Forage at the cell the agent ends its action on.
    tag = state.berries.get(agent.pos)
    if tag is not None and can_harvest(agent, tag, config):
        del state.berries[agent.pos]
        agent.bag.append(tag)
        reward += rw.forage_hit

    agent.health += config.h_decay
    done = False
    if agent.health <= 0.0:
        agent.alive = False
        agent.health = 0.0
        agent.pos = None
        reward += rw.die
        done = True
    elif state.step + 1 >= config.t_max:
        reward += rw.survive_episode
        done = True
    return reward, state, done


def observe(state: GridState, agent_id: int, config: SimConfig) -> Observation:
    agent = state.agents[agent_id]
    distance = state.width + state.height
    if agent.pos is not None:
        ax, ay = agent.pos
        for (bx, by), tag in state.berries.items():
            if can_harvest(agent, tag, config):
                distance = min(distance, abs(bx - ax) + abs(by - ay))
    return Observation(
        own_health=agent.health if agent.alive else 0.0,
        own_bag=agent.bag_count,
        berry_distance=distance,
        wellbeing=tuple(wellbeing(a, config) for a in state.agents),
    )


def n_features(config: SimConfig) -> int:
    return 3 + config.n_agents


def encode_features(obs: Observation, config: SimConfig) -> np.ndarray:
    """Scale observation entries to order one for the Q-network."""
    out = np.empty(3 + len(obs.wellbeing), dtype=np.float64)
    out[0] = obs.own_health / config.h_initial
    out[1] = obs.own_bag / config.b_initial
    out[2] = obs.berry_distance / (config.grid_width + config.grid_height)
    out[3:] = np.asarray(obs.wellbeing) / config.spawn_wellbeing
    return out


def episode_done(state: GridState, config: SimConfig) -> bool:
    return state.step >= config.t_max or not any(a.alive for a in state.agents)


def run_step(state: GridState, actors, config: SimConfig) -> bool:
    """One environment step: every living agent acts once, in a fresh random order.

    Each actor must expose take_turn(state). Returns True when the episode is
    over (all agents dead or the step budget is spent).
    """
    alive_ids = np.array([a.id for a in state.agents if a.alive], dtype=np.int64)
    if alive_ids.size == 0:
        return True
    for agent_id in state.rng.permutation(alive_ids):
        agent = state.agents[int(agent_id)]
        if agent.alive:
            actors[agent.id].take_turn(state)
    state.step += 1
    return episode_done(state, config)
