"""Agents that learn an incentive function by differentiating their own
extrinsic objective through the recipients' policy updates.

Each training iteration sees two trajectories.  The first (tau) is rolled
under current parameters and drives every agent's policy update; the second
(tau_hat) is rolled under the updated policies and scores the incentives:
the giver minimizes

    Loss = - sum_{j != i} sum_t log pi_{theta_hat_j}(a_t | o_t) * R_t^i

where R_t^i is the giver's own discounted extrinsic reward-to-go in
tau_hat, and theta_hat_j is kept as a graph expression of the giver's
incentive parameters (the incentives it paid in tau enter recipient j's
per-step update weights).  A separate discounted L1 cost of the incentives
emitted in tau is descended by its own Adam accumulator, scaled by the cost
coefficient; it never touches the policy objective.

The decentralized variant never reads other agents' parameters: it fits a
behavior model to each opponent's observed state-action pairs and
differentiates through a fictitious policy update of the model instead,
assuming all agents run the same learning rule.
"""

from __future__ import annotations

import numpy as np

from .. import nets
from ..autodiff import Graph, grad_through_update
from ..nets import MlpSpec
from ..optim import Adam, clip_global_norm
from .base import Agent
from .baselines import AcAgent, PgAgent
from .core import (
    CLIP_NORM,
    PendingUpdate,
    discount_matrix,
    discounted_suffix,
    incentive_forward,
    incentive_graph_forward,
)
from .opponent import OpponentModel
from .trajectory import Trajectory


class LioMixin:
    gives_incentives = True
    cost_in_reward = False

    def _init_incentive(self, obs_dim, encoder, cfg, rng, decentralized):
        self.encoder = encoder
        self.inc_spec = MlpSpec((obs_dim + encoder.dim, *cfg.incentive_hidden, self.n_agents))
        self.eta = nets.init_params(self.inc_spec, rng)
        self.adam_main = Adam(self.inc_spec.n_params, cfg.alpha_eta)
        self.adam_cost = Adam(self.inc_spec.n_params, cfg.alpha_cost)
        self.decentralized = decentralized
        self.inc_clip_events = 0
        self._eta_next = None
        self.models: dict[int, OpponentModel] = {}
        if decentralized:
            self.algo = "lio-dec"
            for j in range(self.n_agents):
                if j != self.index:
                    self.models[j] = OpponentModel(
                        self.policy.spec,
                        rng,
                        lr=cfg.model_lr,
                        fit_steps=cfg.model_fit_steps,
                        buffer_episodes=cfg.model_buffer,
                    )

    # -- acting ---------------------------------------------------------- #

    def incentives_for(self, obs, actions, meta):
        x = np.concatenate([obs, self.encoder(actions, self.index)])
        given = incentive_forward(self.inc_spec, self.eta, x, self.cfg.r_max, self.index)
        return given, x

    # -- learning -------------------------------------------------------- #

    def observe_opponents(self, traj: Trajectory) -> None:
        """Refit behavior models on one episode (decentralized mode only)."""
        for j, model in self.models.items():
            model.update(traj.obs[j][: traj.steps], traj.actions[:, j])

    def _recipient_update(self, j: int, traj: Trajectory, pendings, gamma: float) -> PendingUpdate:
        if not self.decentralized:
            return pendings[j]
        return self._fictitious_update(j, traj, gamma)

    def _fictitious_update(self, j: int, traj: Trajectory, gamma: float) -> PendingUpdate:
        """Replay the recipient's assumed update rule on the fitted model."""
        model = self.models[j]
        obs_j = traj.obs[j][: traj.steps]
        actions_j = traj.actions[:, j]
        J, _, _ = nets.logprob_jacobian(model.spec, model.params, obs_j, actions_j)
        extra = np.zeros_like(model.params)
        if self.cfg.entropy_coef:
            _, egrad = nets.entropy_grad(model.spec, model.params, obs_j)
            extra = self.cfg.entropy_coef * egrad
        w = discounted_suffix(traj.total_rewards[:, j], gamma)
        f = J.T @ w + extra
        _, scale = clip_global_norm(f, CLIP_NORM)
        coef = self.cfg.alpha_theta * scale
        return PendingUpdate(
            spec=model.spec,
            base_theta=model.params.copy(),
            theta_hat=model.params + coef * f,
            J=J,
            coef=coef,
            extra=extra,
            kind="return",
            bootstrap=None,
        )

    def incentive_gradients(self, traj: Trajectory, traj_hat: Trajectory, pendings, gamma: float):
        """Gradients of the cross-validated loss and of the discounted L1
        cost w.r.t. the incentive parameters; returns
        (grad_loss, grad_cost | None, loss value, cost value | None)."""
        T = traj.steps
        t_hat = traj_hat.steps
        g = Graph()
        eta_node = g.param("eta")
        x = traj.inc_inputs[self.index]
        out = incentive_graph_forward(g, self.inc_spec, eta_node, x, self.cfg.r_max, self.index)
        giver_returns = discounted_suffix(traj_hat.env_rewards[:, self.index], gamma)
        theta_hats, terms = [], []
        for j in range(self.n_agents):
            if j == self.index:
                continue
            pu = self._recipient_update(j, traj, pendings, gamma)
            base_w = traj.total_rewards[:, j] - traj.incentives[:, self.index, j]
            if pu.kind == "advantage":
                base_w = base_w + pu.bootstrap
            w = g.add(g.const(base_w), g.column(out, j))
            if pu.kind == "return":
                w = g.matmul(g.const(discount_matrix(T, gamma)), w)
            delta = g.matmul(g.const(pu.J.T), w)
            theta_hat = g.add(
                g.const(pu.base_theta + pu.coef * pu.extra), g.scale(delta, pu.coef)
            )
            logits = nets.graph_forward(g, pu.spec, theta_hat, traj_hat.obs[j][:t_hat])
            lp = g.pick(g.log_softmax(logits), traj_hat.actions[:, j])
            terms.append(g.sum(g.mul(lp, g.const(giver_returns))))
            theta_hats.append(theta_hat)
        loss = g.neg(g.add_n(terms))
        cost = None
        if self.cfg.cost_coef:
            gamma_pow = gamma ** np.arange(T, dtype=np.float64)
            cost = g.sum(g.mul(g.const(gamma_pow), g.sum(g.abs(out), axis=1)))
        values = g.eval({"eta": self.eta})
        grad_loss = grad_through_update(g, loss, theta_hats, eta_node, values=values)
        grad_cost = cost_value = None
        if cost is not None:
            grad_cost = g.grad(cost, eta_node, values=values)
            cost_value = float(values[cost.idx])
        return grad_loss, grad_cost, float(values[loss.idx]), cost_value

    def incentive_update(self, traj: Trajectory, traj_hat: Trajectory, pendings, gamma: float) -> None:
        grad_loss, grad_cost, _, _ = self.incentive_gradients(traj, traj_hat, pendings, gamma)
        grad_loss, scale = clip_global_norm(grad_loss, CLIP_NORM)
        if scale != 1.0:
            self.inc_clip_events += 1
        delta_eta = self.adam_main.step(grad_loss)
        if grad_cost is not None:
            grad_cost, _ = clip_global_norm(grad_cost, CLIP_NORM)
            delta_eta = delta_eta + self.adam_cost.step(self.cfg.cost_coef * grad_cost)
        self._eta_next = self.eta + delta_eta

    def apply_incentive_update(self) -> None:
        if self._eta_next is not None:
            self.eta = self._eta_next
            self._eta_next = None

    def diverged(self):
        return super().diverged() or not np.all(np.isfinite(self.eta))

    def state_arrays(self):
        arrays = super().state_arrays()
        arrays["eta"] = self.eta
        return arrays

    def load_state_arrays(self, arrays):
        super().load_state_arrays(arrays)
        self.eta = np.asarray(arrays["eta"], dtype=np.float64)


class LioPgAgent(LioMixin, PgAgent):
    """Incentive learner whose policy part is plain policy gradient."""

    algo = "lio"

    def __init__(self, index, n_agents, obs_dim, n_env_actions, cfg, rng, encoder, decentralized=False):
        super().__init__(index, n_agents, obs_dim, n_env_actions, cfg, rng)
        self._init_incentive(obs_dim, encoder, cfg, rng, decentralized)


class LioAcAgent(LioMixin, AcAgent):
    """Incentive learner whose policy part is the actor-critic rule."""

    algo = "lio"

    def __init__(self, index, n_agents, obs_dim, n_env_actions, cfg, rng, encoder, decentralized=False):
        super().__init__(index, n_agents, obs_dim, n_env_actions, cfg, rng)
        if decentralized:
            raise NotImplementedError("decentralized mode supports the policy-gradient learner")
        self._init_incentive(obs_dim, encoder, cfg, rng, decentralized)
