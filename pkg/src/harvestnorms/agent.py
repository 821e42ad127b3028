"""Per-step agent update: policy, environment feedback, sanction shaping,
replay storage, and behaviour recording, in that order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import EthicsConfig, RAWLE, SimConfig
from .env import GridState, encode_features, observe, step_agent
from .ethics import could_improve_min, sanction
from .learner import DQNLearner
from .norms import BehaviourBase, ViewThresholds, action_class, make_view


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float  # shaped: environmental reward plus sanction
    next_state: np.ndarray
    done: bool


class HarvestAgent:
    """One learning agent: acts in the grid and updates its own modules."""

    def __init__(self, agent_id: int, learner: DQNLearner, behaviours: BehaviourBase,
                 sim: SimConfig, ethics: EthicsConfig,
                 thresholds: ViewThresholds | None = None):
        self.id = agent_id
        self.learner = learner
        self.behaviours = behaviours
        self.sim = sim
        self.ethics = ethics
        self.thresholds = thresholds or ViewThresholds.from_sim(sim)
        self.apply_sanctions = sim.society == RAWLE
        # Exposed for inspection: the last turn's shaping inputs and outputs.
        self.last_raw_reward = 0.0
        self.last_sanction = 0.0
        self.last_u_before: np.ndarray | None = None
        self.last_u_after: np.ndarray | None = None
        self.last_transition: Transition | None = None

    def take_turn(self, state: GridState) -> Transition:
        sim = self.sim
        obs_before = observe(state, self.id, sim)
        u_before = np.asarray(obs_before.wellbeing)
        improvable = could_improve_min(state, self.id, sim) if self.apply_sanctions else False
        features_before = encode_features(obs_before, sim)

        action = self.learner.select_action(features_before)
        raw_reward, _, done = step_agent(state, self.id, action, sim)

        obs_after = observe(state, self.id, sim)
        u_after = np.asarray(obs_after.wellbeing)
        shaping = 0.0
        if self.apply_sanctions and np.any(u_after > 0.0):
            shaping = sanction(
                u_before, u_after, improvable, sim.rewards.sanction_magnitude,
                penalise_worsened_min=self.ethics.penalise_worsened_min,
                penalise_missed_improvement=self.ethics.penalise_missed_improvement,
            )
        shaped = raw_reward + shaping

        transition = Transition(
            state=features_before,
            action=action,
            reward=shaped,
            next_state=encode_features(obs_after, sim),
            done=done,
        )
        self.learner.store(transition.state, transition.action, transition.reward,
                           transition.next_state, transition.done)
        self.learner.train()
        self.learner.end_turn()

        view = make_view(obs_before, self.id, self.thresholds)
        self.behaviours.record(view, action_class(action), shaped)

        self.last_raw_reward = raw_reward
        self.last_sanction = shaping
        self.last_u_before = u_before
        self.last_u_after = u_after
        self.last_transition = transition
        return transition
