"""Episode record consumed by both policy and incentive updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trajectory:
    """One episode.

    obs[i] has T+1 rows (the final observation is appended); actions,
    rewards and incentives have T rows.  incentives[t, i, j] is what agent i
    paid agent j at step t (diagonal structurally zero).  reward_costs holds
    giving costs that are charged inside the total reward - nonzero only for
    agents whose give-reward channel is part of their action space.  Total
    rewards satisfy total[:, j] = env[:, j] + received[:, j] - costs[:, j].
    """

    episode: int
    obs: list[np.ndarray]
    actions: np.ndarray
    env_rewards: np.ndarray
    incentives: np.ndarray
    reward_costs: np.ndarray
    total_rewards: np.ndarray
    inc_inputs: list[np.ndarray | None]
    metas: list[list[dict]] = field(default_factory=list)
    infos: list[dict] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.actions.shape[0]

    @property
    def n_agents(self) -> int:
        return self.actions.shape[1]

    def received(self) -> np.ndarray:
        """(T, N): incentives received by each agent per step."""
        return self.incentives.sum(axis=1)

    def given(self) -> np.ndarray:
        """(T, N): incentives given by each agent per step."""
        return self.incentives.sum(axis=2)

    def validate(self) -> None:
        assert np.allclose(np.diagonal(self.incentives, axis1=1, axis2=2), 0.0)
        expect = self.env_rewards + self.received() - self.reward_costs
        assert np.allclose(self.total_rewards, expect)
