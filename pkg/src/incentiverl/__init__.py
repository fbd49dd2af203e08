"""Multi-agent reinforcement learning with learned inter-agent incentives.

Subpackages:
  autodiff   reverse-mode engine with gradient-through-update support
  nets       flat-parameter dense networks and per-step gradient helpers
  envs       matrix game, escape room, waste-cleanup gridworld
  agents     incentive learners and baselines
  exact_ipd  closed-form learning dynamics in the matrix game
  harness    experiment orchestration, metrics, classification, probes
"""

from . import agents, autodiff, config, envs, exact_ipd, harness, metrics, nets, optim

__all__ = [
    "agents",
    "autodiff",
    "config",
    "envs",
    "exact_ipd",
    "harness",
    "metrics",
    "nets",
    "optim",
]

__version__ = "0.1.0"
