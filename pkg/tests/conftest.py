"""Shared helpers for building configs and hand-crafted grid states."""

from __future__ import annotations

import numpy as np

from harvestnorms.config import (
    BASELINE,
    CAPABILITIES,
    GRID_DEFAULTS,
    RewardTable,
    SimConfig,
)
from harvestnorms.env import AgentState, GridState, N_ACTIONS, TALL, step_agent


def make_sim(scenario: str = CAPABILITIES, society: str = BASELINE, **overrides) -> SimConfig:
    width, height = GRID_DEFAULTS[scenario]
    values = {
        "scenario": scenario,
        "society": society,
        "grid_width": width,
        "grid_height": height,
        "rewards": RewardTable.for_society(society),
    }
    values.update(overrides)
    return SimConfig(**values)


def make_state(config: SimConfig, positions, berries=None, healths=None,
               bags=None, traits=None, seed=0) -> GridState:
    """Hand-placed grid state; defaults: full health, empty bags."""
    agents = []
    for i, pos in enumerate(positions):
        trait = traits[i] if traits else (
            (TALL if i % 2 == 0 else "short") if config.scenario == CAPABILITIES else i)
        agents.append(AgentState(
            id=i,
            pos=pos,
            health=healths[i] if healths else config.h_initial,
            bag=list(bags[i]) if bags else [],
            trait=trait,
        ))
    return GridState(
        width=config.grid_width,
        height=config.grid_height,
        berries=dict(berries or {}),
        agents=agents,
        step=0,
        rng=np.random.default_rng(seed),
    )


class RandomActor:
    """Picks uniformly random actions; used for trajectory fuzzing."""

    def __init__(self, agent_id: int, config: SimConfig, rng: np.random.Generator):
        self.id = agent_id
        self.config = config
        self.rng = rng

    def take_turn(self, state):
        action = int(self.rng.integers(N_ACTIONS))
        step_agent(state, self.id, action, self.config)


def snapshot(state: GridState):
    """Comparable value capturing the full simulation state."""
    return (
        state.step,
        tuple(sorted(state.berries.items())),
        tuple(
            (a.id, a.pos, round(a.health, 12), tuple(a.bag), a.alive, a.trait, a.berries_eaten)
            for a in state.agents
        ),
    )
