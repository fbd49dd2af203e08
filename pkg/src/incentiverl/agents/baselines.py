"""Policy-gradient and actor-critic baselines, with optional give-reward
action augmentations.

PG learns from discounted reward-to-go; AC learns from the one-step
advantage r + gamma * V(s') - V_target(s), with the critic trained on the
squared TD error against a Polyak-averaged target network.  The "-d"
augmentation extends the discrete action space with per-recipient
give-reward switches of fixed value; the "-c" augmentation adds a
continuous incentive head whose output is a squashed Gaussian.  For these
augmented baselines the cost of giving is charged inside the agent's own
reward, since giving is part of their policy.
"""

from __future__ import annotations

import numpy as np

from .. import nets
from ..nets import MlpSpec
from ..optim import Adam, clip_global_norm
from .base import Agent
from .core import (
    CLIP_NORM,
    PendingUpdate,
    PolicyCore,
    behavioral_probs,
    discounted_suffix,
    sample_from,
)
from .trajectory import Trajectory

POLYAK_TAU = 0.01
GAUSSIAN_CLAMP = 10.0


class PgAgent(Agent):
    """Independent policy gradient over the environment's action space."""

    algo = "pg"

    def __init__(self, index, n_agents, obs_dim, n_env_actions, cfg, rng):
        super().__init__(index, n_agents)
        self.cfg = cfg
        self.n_env_actions = n_env_actions
        spec = MlpSpec((obs_dim, *cfg.policy_hidden, self._policy_out(n_env_actions)))
        self.policy = PolicyCore(spec, rng, lr=cfg.alpha_theta, entropy_coef=cfg.entropy_coef)

    def _policy_out(self, n_env_actions: int) -> int:
        return n_env_actions

    def act(self, obs, eps, rng):
        a = self.policy.act(obs, eps, rng)
        return self._decode(a)

    def _decode(self, a: int):
        return a, {}

    def action_probs(self, obs):
        return self.policy.probs(obs)

    def _policy_actions(self, traj: Trajectory) -> np.ndarray:
        """Indices into the policy's action space for each step."""
        return traj.actions[:, self.index]

    def _weights(self, traj: Trajectory, gamma: float):
        w = discounted_suffix(traj.total_rewards[:, self.index], gamma)
        return w, "return", None

    def policy_update(self, traj: Trajectory, gamma: float) -> PendingUpdate:
        obs = traj.obs[self.index][: traj.steps]
        w, kind, bootstrap = self._weights(traj, gamma)
        self._last_weights = w
        self._pending = self.policy.build_update(
            obs, self._policy_actions(traj), w, kind, bootstrap
        )
        return self._pending

    def apply_policy_update(self):
        self.policy.theta = self._pending.theta_hat
        self._pending = None

    def diverged(self):
        return not np.all(np.isfinite(self.policy.theta))

    def state_arrays(self):
        return {"theta": self.policy.theta}

    def load_state_arrays(self, arrays):
        self.policy.theta = np.asarray(arrays["theta"], dtype=np.float64)


class AcAgent(PgAgent):
    """Actor-critic with a Polyak-averaged target value network."""

    algo = "ac"

    def __init__(self, index, n_agents, obs_dim, n_env_actions, cfg, rng):
        super().__init__(index, n_agents, obs_dim, n_env_actions, cfg, rng)
        self.critic_spec = MlpSpec((obs_dim, *cfg.critic_hidden, 1))
        self.phi = nets.init_params(self.critic_spec, rng)
        self.phi_target = self.phi.copy()
        self._critic_adam = Adam(self.critic_spec.n_params, cfg.alpha_phi)
        self._phi_next = None

    def values(self, obs: np.ndarray, target: bool = False) -> np.ndarray:
        params = self.phi_target if target else self.phi
        return nets.forward(self.critic_spec, params, obs)[:, 0]

    def _weights(self, traj: Trajectory, gamma: float):
        obs_all = traj.obs[self.index]  # T+1 rows
        v = self.values(obs_all)
        v_targ = self.values(obs_all, target=True)
        T = traj.steps
        mask = np.ones(T)
        mask[-1] = 0.0  # episode end: no bootstrap
        r = traj.total_rewards[:, self.index]
        bootstrap = gamma * v[1:] * mask - v_targ[:T]
        adv = r + bootstrap
        # critic regression toward r + gamma * V_target(s')
        targets = r + gamma * v_targ[1:] * mask
        _, rows = nets.value_grads(self.critic_spec, self.phi, obs_all[:T])
        grad = rows.T @ (-2.0 * (targets - v[:T]) / T)
        grad, _ = clip_global_norm(grad, CLIP_NORM)
        self._phi_next = self.phi + self._critic_adam.step(grad)
        return adv, "advantage", bootstrap

    def apply_policy_update(self):
        super().apply_policy_update()
        if self._phi_next is not None:
            self.phi = self._phi_next
            self._phi_next = None
            self.phi_target = POLYAK_TAU * self.phi + (1.0 - POLYAK_TAU) * self.phi_target

    def diverged(self):
        return super().diverged() or not np.all(np.isfinite(self.phi))

    def state_arrays(self):
        return {
            "theta": self.policy.theta,
            "phi": self.phi,
            "phi_target": self.phi_target,
        }

    def load_state_arrays(self, arrays):
        super().load_state_arrays(arrays)
        self.phi = np.asarray(arrays["phi"], dtype=np.float64)
        self.phi_target = np.asarray(arrays["phi_target"], dtype=np.float64)


class _DiscreteGiveMixin:
    """Product action space: environment action x {keep, give}^(N-1)."""

    gives_incentives = True
    cost_in_reward = True

    def _policy_out(self, n_env_actions: int) -> int:
        return n_env_actions * 2 ** (self.n_agents - 1)

    def _decode(self, a: int):
        n_mask = 2 ** (self.n_agents - 1)
        return a // n_mask, {"policy_action": a, "give_bits": a % n_mask}

    def _policy_actions(self, traj: Trajectory):
        return np.array([meta[self.index]["policy_action"] for meta in traj.metas])

    def incentives_for(self, obs, actions, meta):
        given = np.zeros(self.n_agents)
        bits = meta["give_bits"]
        others = [k for k in range(self.n_agents) if k != self.index]
        for slot, k in enumerate(others):
            if (bits >> slot) & 1:
                given[k] = self.cfg.r_give
        return given, None


class PgdAgent(_DiscreteGiveMixin, PgAgent):
    algo = "pg-d"


class AcdAgent(_DiscreteGiveMixin, AcAgent):
    algo = "ac-d"


def reward_action_log_density(mu: np.ndarray, a_r: np.ndarray, r_max: float) -> float:
    """Log density of the squashed-Gaussian incentive action a_r in
    (0, r_max)^k: a Gaussian over the pre-squash variable u with unit
    covariance, corrected by the inverse Jacobian of a_r = r_max*sigmoid(u).
    """
    a_r = np.asarray(a_r, dtype=np.float64)
    if np.any(a_r <= 0.0) or np.any(a_r >= r_max):
        raise ValueError("density undefined on the boundary of [0, r_max]")
    u = np.log(a_r) - np.log(r_max - a_r)
    gauss = -0.5 * np.sum((u - mu) ** 2) - 0.5 * len(u) * np.log(2.0 * np.pi)
    jac = np.sum(np.log(a_r * (r_max - a_r) / r_max))
    return float(gauss - jac)


class _ContinuousGiveMixin:
    """Factorized policy: discrete action times squashed-Gaussian incentives."""

    gives_incentives = True
    cost_in_reward = True

    def _init_head(self, obs_dim, cfg, rng):
        self.head_spec = MlpSpec((obs_dim, *cfg.incentive_hidden, self.n_agents - 1))
        self.head = nets.init_params(self.head_spec, rng)
        self._head_next = None
        self._others = [k for k in range(self.n_agents) if k != self.index]

    def act(self, obs, eps, rng):
        a, meta = super().act(obs, eps, rng)
        mu = nets.forward(self.head_spec, self.head, obs)
        u = np.clip(rng.normal(mu, 1.0), -GAUSSIAN_CLAMP, GAUSSIAN_CLAMP)
        a_r = self.cfg.r_max / (1.0 + np.exp(-u))
        meta = dict(meta)
        meta.update({"u": u, "a_r": a_r, "mu": mu})
        return a, meta

    def incentives_for(self, obs, actions, meta):
        given = np.zeros(self.n_agents)
        given[self._others] = meta["a_r"]
        return given, None

    def policy_update(self, traj: Trajectory, gamma: float) -> PendingUpdate:
        pending = super().policy_update(traj, gamma)
        obs = traj.obs[self.index][: traj.steps]
        w = self._last_weights
        mus = np.array([meta[self.index]["mu"] for meta in traj.metas])
        us = np.array([meta[self.index]["u"] for meta in traj.metas])
        # d log N(u; mu, I) / d mu = (u - mu), per step, weighted like the
        # discrete log-likelihood terms
        deltas = (us - mus) * w[:, None]
        rows = nets.batch_param_grads(self.head_spec, self.head, obs, deltas)
        f = rows.sum(axis=0)
        f, _ = clip_global_norm(f, CLIP_NORM)
        self._head_next = self.head + self.cfg.alpha_theta * f
        return pending

    def apply_policy_update(self):
        super().apply_policy_update()
        if self._head_next is not None:
            self.head = self._head_next
            self._head_next = None

    def state_arrays(self):
        arrays = super().state_arrays()
        arrays["head"] = self.head
        return arrays

    def load_state_arrays(self, arrays):
        super().load_state_arrays(arrays)
        self.head = np.asarray(arrays["head"], dtype=np.float64)


class PgcAgent(_ContinuousGiveMixin, PgAgent):
    algo = "pg-c"

    def __init__(self, index, n_agents, obs_dim, n_env_actions, cfg, rng):
        super().__init__(index, n_agents, obs_dim, n_env_actions, cfg, rng)
        self._init_head(obs_dim, cfg, rng)


class AccAgent(_ContinuousGiveMixin, AcAgent):
    algo = "ac-c"

    def __init__(self, index, n_agents, obs_dim, n_env_actions, cfg, rng):
        super().__init__(index, n_agents, obs_dim, n_env_actions, cfg, rng)
        self._init_head(obs_dim, cfg, rng)
