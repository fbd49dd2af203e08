"""Agents: incentive learners and their baselines."""

from .base import Agent
from .baselines import (
    AcAgent,
    AccAgent,
    AcdAgent,
    PgAgent,
    PgcAgent,
    PgdAgent,
    reward_action_log_density,
)
from .core import (
    PendingUpdate,
    PolicyCore,
    beam_action_encoder,
    behavioral_probs,
    discount_matrix,
    discounted_suffix,
    incentive_forward,
    incentive_graph_forward,
    load_checkpoint,
    onehot_action_encoder,
    save_checkpoint,
)
from .lio import LioAcAgent, LioMixin, LioPgAgent
from .opponent import OpponentModel, fit_opponent_model
from .trajectory import Trajectory

__all__ = [
    "Agent",
    "AcAgent",
    "AccAgent",
    "AcdAgent",
    "PgAgent",
    "PgcAgent",
    "PgdAgent",
    "reward_action_log_density",
    "PendingUpdate",
    "PolicyCore",
    "beam_action_encoder",
    "behavioral_probs",
    "discount_matrix",
    "discounted_suffix",
    "incentive_forward",
    "incentive_graph_forward",
    "load_checkpoint",
    "onehot_action_encoder",
    "save_checkpoint",
    "LioAcAgent",
    "LioMixin",
    "LioPgAgent",
    "OpponentModel",
    "fit_opponent_model",
    "Trajectory",
]
