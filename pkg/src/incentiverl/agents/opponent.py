"""Maximum-likelihood modeling of another agent's policy from observed
(observation, action) pairs."""

from __future__ import annotations

from collections import deque

import numpy as np

from .. import nets
from ..nets import MlpSpec
from ..optim import Adam


def fit_opponent_model(
    spec: MlpSpec,
    obs: np.ndarray,
    actions: np.ndarray,
    rng: np.random.Generator,
    lr: float = 0.02,
    max_steps: int = 2000,
    tol: float = 1e-4,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient-ascend the mean log-likelihood until the gradient norm falls
    below `tol` (or `max_steps` is hit); returns the fitted parameters."""
    if len(obs) == 0:
        raise ValueError("cannot fit an opponent model to an empty trajectory")
    params = nets.init_params(spec, rng) if init is None else init.copy()
    adam = Adam(spec.n_params, lr)
    for _ in range(max_steps):
        J, _, _ = nets.logprob_jacobian(spec, params, obs, actions)
        grad = J.mean(axis=0)
        if np.linalg.norm(grad) < tol:
            break
        params += adam.step(-grad)
    return params


class OpponentModel:
    """Incrementally fitted behavior model of one other agent.

    Keeps a window of recent episodes and takes a few Adam steps of
    likelihood ascent whenever a new episode arrives.
    """

    def __init__(
        self,
        spec: MlpSpec,
        rng: np.random.Generator,
        lr: float = 0.01,
        fit_steps: int = 5,
        buffer_episodes: int = 500,
    ):
        self.spec = spec
        self.params = nets.init_params(spec, rng)
        self.adam = Adam(spec.n_params, lr)
        self.fit_steps = fit_steps
        self._obs = deque(maxlen=buffer_episodes)
        self._actions = deque(maxlen=buffer_episodes)
        self.transitions_seen = 0

    def update(self, obs: np.ndarray, actions: np.ndarray) -> None:
        """Add one episode of the opponent's data and refit."""
        if len(obs) == 0:
            raise ValueError("cannot fit an opponent model to an empty trajectory")
        self._obs.append(np.asarray(obs, dtype=np.float64))
        self._actions.append(np.asarray(actions, dtype=np.intp))
        self.transitions_seen += len(actions)
        all_obs = np.concatenate(self._obs)
        all_actions = np.concatenate(self._actions)
        for _ in range(self.fit_steps):
            J, _, _ = nets.logprob_jacobian(self.spec, self.params, all_obs, all_actions)
            self.params += self.adam.step(-J.mean(axis=0))

    def action_probs(self, obs: np.ndarray) -> np.ndarray:
        return nets.policy_probs(self.spec, self.params, obs)
