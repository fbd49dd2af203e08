"""Memory-1 iterated prisoner's dilemma.

Two agents, actions C(=0)/D(=1), 5 rounds per episode.  Each agent observes
the previous round's joint action from its own perspective as a one-hot of
{first-round, CC, CD, DC, DD}, where the first letter is the agent's own
previous action.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .base import EnvError, StepResult

COOPERATE, DEFECT = 0, 1

# PAYOFF[a1][a2] -> (reward agent 1, reward agent 2)
PAYOFF = np.array(
    [
        [[-1.0, -1.0], [-3.0, 0.0]],
        [[0.0, -3.0], [-2.0, -2.0]],
    ]
)


class IteratedPrisonersDilemma:
    n_agents = 2
    n_actions = 2
    obs_dim = 5

    def __init__(self, episode_len: int = 5):
        self.episode_len = episode_len
        self._step = None
        self._last = None  # (a1, a2) or None on the first round

    def reset(self) -> list[np.ndarray]:
        self._step = 0
        self._last = None
        return self._observations()

    def _observations(self) -> list[np.ndarray]:
        obs = []
        for i in range(2):
            o = np.zeros(self.obs_dim)
            if self._last is None:
                o[0] = 1.0
            else:
                own, other = self._last[i], self._last[1 - i]
                o[1 + 2 * own + other] = 1.0
            obs.append(o)
        return obs

    def step(self, actions) -> StepResult:
        if self._step is None or self._step >= self.episode_len:
            raise EnvError("step() on a finished or unreset episode")
        a1, a2 = int(actions[0]), int(actions[1])
        if a1 not in (0, 1) or a2 not in (0, 1):
            raise EnvError(f"actions must be in {{C=0, D=1}}, got {actions}")
        rewards = PAYOFF[a1, a2].copy()
        self._last = (a1, a2)
        self._step += 1
        done = self._step >= self.episode_len
        return StepResult(self._observations(), rewards, done)

    def state_signature(self) -> str:
        raw = f"ipd|{self._step}|{self._last}".encode()
        return hashlib.sha1(raw).hexdigest()
