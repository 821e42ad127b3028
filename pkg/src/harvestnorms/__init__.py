"""Multi-agent harvesting simulator where learners shape their own rewards by
a maximin sanction, mine social norms from behaviour, and are compared against
a baseline society on fairness and sustainability metrics."""

from .config import (
    ALLOTMENT,
    BASELINE,
    CAPABILITIES,
    RAWLE,
    ConfigError,
    ContractError,
    EthicsConfig,
    ExperimentConfig,
    LearnerConfig,
    NormConfig,
    RewardTable,
    SimConfig,
)
from .env import (
    EAT,
    MOVE_EAST,
    MOVE_NORTH,
    MOVE_SOUTH,
    MOVE_WEST,
    N_ACTIONS,
    THROW,
    AgentState,
    GridState,
    Observation,
    encode_features,
    init_episode,
    observe,
    run_step,
    step_agent,
    wellbeing,
    wellbeing_vector,
)
from .ethics import could_improve_min, min_experience, sanction
from .experiment import EpisodeMetrics, run_experiment, run_societies
from .learner import DQNLearner, QNetwork, ReplayBuffer, TrainingError, huber, select_action, sync_target, train_batch
from .metrics import cohens_d, cohens_d_from_stats, gini, mann_whitney_u
from .norms import BehaviourBase, Behaviour, NormBase, ViewThresholds, fitness, generalise, make_view

__version__ = "0.1.0"
