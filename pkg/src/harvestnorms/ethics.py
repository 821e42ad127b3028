"""Maximin evaluation of a state transition and the self-directed sanction.

An agent compares the society's minimum well-being before and after its own
action. Raising the minimum earns a positive sanction; lowering it, or
leaving it unchanged when an improving action was available, earns a
negative one. The sanction is added to the environmental reward.
"""

from __future__ import annotations

import numpy as np

from .config import ContractError, SimConfig
from .env import GridState, wellbeing


def min_experience(values) -> tuple[float, int]:
    """Minimum well-being over living agents and the lowest id attaining it.

    Dead agents report exactly zero well-being and are excluded.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ContractError("empty well-being vector")
    alive = values > 0.0
    if not alive.any():
        raise ContractError("no living agents: episode is over")
    best_value = None
    best_id = -1
    for i, value in enumerate(values):
        if value > 0.0 and (best_value is None or value < best_value):
            best_value = float(value)
            best_id = i
    return best_value, best_id


def sanction(u_before, u_after, improvable: bool, magnitude: float,
             *, penalise_worsened_min: bool = True,
             penalise_missed_improvement: bool = True) -> float:
    """Self-directed sanction for the change in minimum well-being.

    +magnitude when the minimum rose; -magnitude when it fell (if
    penalise_worsened_min) or stayed put despite an available improving
    action (if penalise_missed_improvement); 0 otherwise.
    """
    u_before = np.asarray(u_before, dtype=np.float64)
    u_after = np.asarray(u_after, dtype=np.float64)
    if u_before.shape != u_after.shape:
        raise ContractError("well-being vectors must have the same length")
    min_before, _ = min_experience(u_before)
    min_after, _ = min_experience(u_after)
    if min_after > min_before:
        return magnitude
    if min_after < min_before:
        return -magnitude if penalise_worsened_min else 0.0
    if improvable and penalise_missed_improvement:
        return -magnitude
    return 0.0


def could_improve_min(state: GridState, agent_id: int, config: SimConfig) -> bool:
    """Whether the agent has an action available that would raise the minimum.

    True only with a berry in the bag, and then either the agent is itself
    the unique worst-off (eating raises its health) or it is healthy enough
    to throw and some other living agent sits at the minimum.
    """
    agent = state.agents[agent_id]
    if not agent.alive:
        raise ContractError(f"agent {agent_id} is dead")
    if not agent.bag:
        return False
    values = [(wellbeing(a, config), a.id) for a in state.agents if a.alive]
    minimum = min(v for v, _ in values)
    argmin_ids = [i for v, i in values if v == minimum]
    if argmin_ids == [agent_id]:
        return True
    others_at_min = any(i != agent_id for i in argmin_ids)
    return others_at_min and agent.health >= config.h_throw
