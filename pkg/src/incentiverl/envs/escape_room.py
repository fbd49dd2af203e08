"""N-player escape-room game, symmetric and asymmetric variants.

Positions are {lever, start, door}; an action names the target position
(moving to the current position is staying).  All agents move
simultaneously; the lever count is evaluated on post-move positions.
Staying costs nothing, any movement costs -1, and when at least M agents
hold the lever one agent at the door exits with +10, ending the episode.
If several agents stand at the door in that step, the lowest-index one
takes the exit; the others fall under the ordinary stay/move rules.
"""

from __future__ import annotations

import hashlib
from itertools import product

import numpy as np

from .base import EnvError, StepResult

LEVER, START, DOOR = 0, 1, 2
_POSITIONS = ("lever", "start", "door")


def _step_rewards(prev: np.ndarray, new: np.ndarray, m: int):
    """Per-agent extrinsic rewards for one simultaneous move; returns
    (rewards, index of exiting agent or None)."""
    n = len(prev)
    rewards = np.where(new == prev, 0.0, -1.0)
    exited = None
    if int(np.sum(new == LEVER)) >= m:
        at_door = np.flatnonzero(new == DOOR)
        if at_door.size:
            exited = int(at_door[0])
            rewards[exited] = 10.0
    return rewards, exited


class EscapeRoom:
    """Symmetric ER(N, M): N agents, door opens with >= M lever-pullers."""

    n_actions = 3
    max_steps = 5

    def __init__(self, n_agents: int = 2, m_required: int = 1):
        if not m_required < n_agents:
            raise EnvError(f"require M < N, got N={n_agents}, M={m_required}")
        self.n_agents = n_agents
        self.m_required = m_required
        self.obs_dim = 3 * n_agents
        self._positions = None
        self._step = None
        self._done = True

    def reset(self) -> list[np.ndarray]:
        self._positions = np.full(self.n_agents, START)
        self._step = 0
        self._done = False
        return self._observations()

    def _observations(self) -> list[np.ndarray]:
        obs = []
        for i in range(self.n_agents):
            o = np.zeros(self.obs_dim)
            order = [i] + [k for k in range(self.n_agents) if k != i]
            for slot, agent in enumerate(order):
                o[3 * slot + self._positions[agent]] = 1.0
            obs.append(o)
        return obs

    def step(self, actions) -> StepResult:
        if self._done:
            raise EnvError("step() on a finished or unreset episode")
        actions = np.asarray(actions, dtype=int)
        if actions.shape != (self.n_agents,) or not np.all((actions >= 0) & (actions <= 2)):
            raise EnvError(f"each action must be a target in {{lever, start, door}}, got {actions}")
        rewards, exited = _step_rewards(self._positions, actions, self.m_required)
        self._positions = actions.copy()
        self._step += 1
        self._done = exited is not None or self._step >= self.max_steps
        return StepResult(
            self._observations(), rewards, self._done, info={"exited": exited}
        )

    def state_signature(self) -> str:
        raw = f"er|{self.n_agents}|{self.m_required}|{self._step}|{tuple(self._positions)}".encode()
        return hashlib.sha1(raw).hexdigest()


def er_optimal_return(n_agents: int, m_required: int) -> float:
    """Maximum one-shot collective extrinsic return, by brute force over all
    joint target assignments from the start state."""
    if not m_required < n_agents:
        raise EnvError(f"require M < N, got N={n_agents}, M={m_required}")
    start = np.full(n_agents, START)
    best = -float("inf")
    for assignment in product((LEVER, START, DOOR), repeat=n_agents):
        rewards, _ = _step_rewards(start, np.asarray(assignment), m_required)
        best = max(best, float(rewards.sum()))
    return best


class AsymmetricEscapeRoom:
    """Two-agent asymmetric variant.

    Agent 0 moves between {start, door} and is penalized -1 every step
    unless agent 1 holds the lever, in which case being at (or moving to)
    the door pays +10 and ends the episode.  Agent 1 moves between
    {start, lever} and pays -1 for any movement, 0 for staying.  Action 0
    targets `start`, action 1 targets the agent's other state.  Agent 0
    additionally observes agent 1's current-step action, so agent 1 acts
    first in each step.
    """

    n_agents = 2
    n_actions = 2
    max_steps = 5
    # obs layout: agent 0 -> own pos (2), peer pos (2), peer action (2)
    #             agent 1 -> own pos (2), peer pos (2)
    obs_dims = (6, 4)
    action_observation_order = (1, 0)

    def __init__(self):
        self._pos = None  # [agent0 in {0 start, 1 door}, agent1 in {0 start, 1 lever}]
        self._done = True
        self._step = None

    @property
    def obs_dim(self):
        return max(self.obs_dims)

    def reset(self) -> list[np.ndarray]:
        self._pos = np.zeros(2, dtype=int)
        self._step = 0
        self._done = False
        return self._observations()

    def _observations(self) -> list[np.ndarray]:
        o0 = np.zeros(6)
        o0[self._pos[0]] = 1.0
        o0[2 + self._pos[1]] = 1.0
        o1 = np.zeros(4)
        o1[self._pos[1]] = 1.0
        o1[2 + self._pos[0]] = 1.0
        return [o0, o1]

    @staticmethod
    def fill_peer_action(obs: np.ndarray, agent: int, peer_action: int) -> np.ndarray:
        """Embed the peer's current-step action into agent 0's observation."""
        if agent != 0:
            return obs
        out = obs.copy()
        out[4:6] = 0.0
        out[4 + int(peer_action)] = 1.0
        return out

    def step(self, actions) -> StepResult:
        if self._done:
            raise EnvError("step() on a finished or unreset episode")
        a0, a1 = int(actions[0]), int(actions[1])
        if a0 not in (0, 1) or a1 not in (0, 1):
            raise EnvError(f"actions must be binary position targets, got {actions}")
        new = np.array([a0, a1])
        rewards = np.zeros(2)
        rewards[1] = 0.0 if new[1] == self._pos[1] else -1.0
        lever_held = new[1] == 1
        exited = lever_held and new[0] == 1
        rewards[0] = 10.0 if exited else -1.0
        self._pos = new
        self._step += 1
        self._done = exited or self._step >= self.max_steps
        return StepResult(
            self._observations(), rewards, self._done, info={"exited": 0 if exited else None}
        )

    def state_signature(self) -> str:
        raw = f"er-asym|{self._step}|{tuple(self._pos)}".encode()
        return hashlib.sha1(raw).hexdigest()
