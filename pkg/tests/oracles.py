"""Independent recomputations used as oracles against the graph-based path:
a plain-numpy evaluation of the cross-validated incentive loss, and the
explicit three-factor chain-rule product for its gradient."""

from __future__ import annotations

import numpy as np

from incentiverl import nets
from incentiverl.agents import discount_matrix, discounted_suffix


def incentive_outputs(agent, eta, x):
    z = nets.forward(agent.inc_spec, eta, x)
    out = agent.cfg.r_max / (1.0 + np.exp(-z))
    out[:, agent.index] = 0.0
    return out


def recipient_weights(agent, j, pu, traj, out, gamma):
    base = traj.total_rewards[:, j] - traj.incentives[:, agent.index, j]
    w = base + out[:, j]
    if pu.kind == "advantage":
        return w + pu.bootstrap
    return discount_matrix(traj.steps, gamma) @ w


def loss_value(agent, eta, traj, traj_hat, pendings, gamma) -> float:
    """Plain-numpy evaluation of the incentive objective's loss form."""
    i = agent.index
    out = incentive_outputs(agent, eta, traj.inc_inputs[i])
    t_hat = traj_hat.steps
    returns_i = discounted_suffix(traj_hat.env_rewards[:, i], gamma)
    loss = 0.0
    for j in range(agent.n_agents):
        if j == i:
            continue
        pu = pendings[j]
        w = recipient_weights(agent, j, pu, traj, out, gamma)
        theta_hat = pu.base_theta + pu.coef * (pu.J.T @ w + pu.extra)
        logits = nets.forward(pu.spec, theta_hat, traj_hat.obs[j][:t_hat])
        lp = nets.log_softmax(logits)[np.arange(t_hat), traj_hat.actions[:, j]]
        loss -= float(lp @ returns_i)
    return loss


def cost_value(agent, eta, traj, gamma) -> float:
    out = incentive_outputs(agent, eta, traj.inc_inputs[agent.index])
    weights = gamma ** np.arange(traj.steps)
    return float(weights @ np.abs(out).sum(axis=1))


def incentive_output_jacobian(agent, eta, x, j):
    """(T, |eta|) Jacobian of the incentive paid to column j, per step."""
    z = nets.forward(agent.inc_spec, eta, x)
    s = 1.0 / (1.0 + np.exp(-z))
    deltas = np.zeros_like(z)
    deltas[:, j] = agent.cfg.r_max * s[:, j] * (1.0 - s[:, j])
    return nets.batch_param_grads(agent.inc_spec, eta, x, deltas)


def explicit_chain_rule_gradient(agent, eta, traj, traj_hat, pendings, gamma):
    """The objective gradient assembled factor by factor: for each
    recipient, the Jacobian of its updated parameters w.r.t. the incentive
    parameters (learning rate times per-step score outer incentive-return
    sensitivities) times the recipient-score-weighted giver return."""
    i = agent.index
    out = incentive_outputs(agent, eta, traj.inc_inputs[i])
    t_hat = traj_hat.steps
    returns_i = discounted_suffix(traj_hat.env_rewards[:, i], gamma)
    total = np.zeros_like(eta)
    for j in range(agent.n_agents):
        if j == i:
            continue
        pu = pendings[j]
        inc_jac = incentive_output_jacobian(agent, eta, traj.inc_inputs[i], j)  # (T, |eta|)
        if pu.kind == "advantage":
            dw_deta = inc_jac
        else:
            dw_deta = discount_matrix(traj.steps, gamma) @ inc_jac
        # d theta_hat / d eta: (m, |eta|)
        dtheta_deta = pu.coef * (pu.J.T @ dw_deta)
        # d J^i / d theta_hat at the realized updated parameters
        w = recipient_weights(agent, j, pu, traj, out, gamma)
        theta_hat = pu.base_theta + pu.coef * (pu.J.T @ w + pu.extra)
        J_hat, _, _ = nets.logprob_jacobian(pu.spec, theta_hat, traj_hat.obs[j][:t_hat], traj_hat.actions[:, j])
        dJ_dtheta = J_hat.T @ returns_i  # (m,)
        total += dtheta_deta.T @ dJ_dtheta
    return total
