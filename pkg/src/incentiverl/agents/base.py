"""Agent interface consumed by the rollout and training loops."""

from __future__ import annotations

import numpy as np

from .core import PendingUpdate
from .trajectory import Trajectory


class Agent:
    """Base class: acting, optional incentive emission, staged learning.

    Policy updates are two-phase (stage with `policy_update`, then
    `apply_policy_update`) so the training loop can roll a fresh trajectory
    under updated policies while reward-givers still see the staged update's
    ingredients.
    """

    algo = "base"
    gives_incentives = False
    cost_in_reward = False

    def __init__(self, index: int, n_agents: int):
        self.index = index
        self.n_agents = n_agents
        self.observes_given = False
        self._given_cum = np.zeros(n_agents)
        self._pending: PendingUpdate | None = None

    # -- acting --------------------------------------------------------- #

    def begin_episode(self) -> None:
        self._given_cum = np.zeros(self.n_agents)

    def policy_obs(self, base_obs: np.ndarray) -> np.ndarray:
        """Environment observation plus any agent-side features (cumulative
        incentives given within the episode, when enabled)."""
        if self.observes_given:
            return np.concatenate([base_obs, self._given_cum])
        return base_obs

    def note_given(self, given: np.ndarray) -> None:
        self._given_cum = self._given_cum + given

    def act(self, obs: np.ndarray, eps: float, rng: np.random.Generator):
        """Returns (environment action, metadata dict)."""
        raise NotImplementedError

    def incentives_for(self, obs: np.ndarray, actions, meta: dict):
        """Incentive vector this agent pays out this step, or (None, None).

        Returns (given (n_agents,), incentive-net input or None)."""
        return None, None

    # -- learning ------------------------------------------------------- #

    def policy_update(self, traj: Trajectory, gamma: float) -> PendingUpdate:
        raise NotImplementedError

    def apply_policy_update(self) -> None:
        raise NotImplementedError

    def incentive_update(self, traj, traj_hat, pendings, gamma) -> None:
        pass

    def apply_incentive_update(self) -> None:
        pass

    def diverged(self) -> bool:
        return False

    # -- persistence / inspection --------------------------------------- #

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        pass

    def action_probs(self, obs: np.ndarray) -> np.ndarray:
        raise NotImplementedError
