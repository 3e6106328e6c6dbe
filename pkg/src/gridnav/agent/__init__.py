"""Reinforcement-learning core: replay, policies, update rules, phases."""

from .config import AgentConfig, UpdateRule
from .learning import compute_targets, sync_target, td_targets, train_step
from .phases import (
    EpisodeLog,
    ExplorationResult,
    ExploitationResult,
    NavigationEnv,
    TRAINING_LOG_COLUMNS,
    run_exploitation_phase,
    run_exploration_phase,
    write_training_log,
)
from .policy import PolicyDecision, correct_action, epsilon_greedy
from .replay import ReplayBuffer, Transition

__all__ = [
    "AgentConfig",
    "EpisodeLog",
    "ExplorationResult",
    "ExploitationResult",
    "NavigationEnv",
    "PolicyDecision",
    "ReplayBuffer",
    "TRAINING_LOG_COLUMNS",
    "Transition",
    "UpdateRule",
    "compute_targets",
    "correct_action",
    "epsilon_greedy",
    "run_exploitation_phase",
    "run_exploration_phase",
    "sync_target",
    "td_targets",
    "train_step",
    "write_training_log",
]
