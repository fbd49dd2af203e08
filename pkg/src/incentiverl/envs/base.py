"""Shared environment contract."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EnvError(Exception):
    """Invalid action, step after termination, or bad parameters."""


@dataclass
class StepResult:
    """One transition: per-agent observations, extrinsic rewards, done flag."""

    obs: list[np.ndarray]
    rewards: np.ndarray
    done: bool
    info: dict = field(default_factory=dict)
