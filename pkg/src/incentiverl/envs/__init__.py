"""Markov-game environments: matrix game, escape room, waste-cleanup grid."""

from .base import StepResult, EnvError
from .ipd import IteratedPrisonersDilemma, PAYOFF
from .escape_room import (
    EscapeRoom,
    AsymmetricEscapeRoom,
    er_optimal_return,
    LEVER,
    START,
    DOOR,
)
from .cleanup import Cleanup, CleanupParams
from .trace import TraceRecorder

__all__ = [
    "StepResult",
    "EnvError",
    "IteratedPrisonersDilemma",
    "PAYOFF",
    "EscapeRoom",
    "AsymmetricEscapeRoom",
    "er_optimal_return",
    "LEVER",
    "START",
    "DOOR",
    "Cleanup",
    "CleanupParams",
    "TraceRecorder",
]
