"""Closed-form incentive-learning dynamics in the iterated prisoner's dilemma.

Policies are the two cooperation probabilities (theta1, theta2); each
agent's incentive table eta^i = [eta_C, eta_D] holds the rewards it pays the
other agent for cooperating/defecting.  With the joint action distribution
p = [t1 t2, t1 (1-t2), (1-t1) t2, (1-t1)(1-t2)] over (CC, CD, DC, DD) and
incentive-augmented payoff vectors

    r1 = [-1 + e2C, -3 + e2C,  0 + e2D, -2 + e2D]
    r2 = [-1 + e1C,  0 + e1D, -3 + e1C, -2 + e1D]

the value of agent i is V^i = p . r^i / (1 - gamma).  Exact gradient ascent
gives the update maps implemented here: the policy step moves theta_j by
alpha/(1-gamma) * (eta^i_C - eta^i_D - 1), and the incentive step moves each
eta^i by beta*alpha/(1-gamma)^2 * 2 * [1, -1], so the cooperation incentive
only ever grows and the defection incentive only ever shrinks.  Once both
agents satisfy eta_C - eta_D - 1 > 0, mutual cooperation is the strictly
dominant outcome and both cooperation probabilities rise until clamped.

Policies are clamped to [delta, 1-delta] (the raw updates are unconstrained)
and incentives to [0, 3], the domain the dynamics are visualized on.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

THETA_CLAMP = 1e-3
ETA_MAX = 3.0


@dataclass
class ExactState:
    """Tabular parameters and step sizes for the exact dynamics."""

    theta: np.ndarray  # (2,) cooperation probabilities
    eta: np.ndarray  # (2, 2): eta[i] = [eta_C, eta_D] paid by agent i
    alpha: float = 0.01  # policy step size
    beta: float = 0.01  # incentive step size
    gamma: float = 0.9

    @staticmethod
    def make(theta1, theta2, eta1=(0.0, 0.0), eta2=(0.0, 0.0), alpha=0.01, beta=0.01, gamma=0.9):
        return ExactState(
            theta=np.array([theta1, theta2], dtype=float),
            eta=np.array([eta1, eta2], dtype=float),
            alpha=alpha,
            beta=beta,
            gamma=gamma,
        )


def joint_distribution(theta: np.ndarray) -> np.ndarray:
    t1, t2 = theta
    return np.array([t1 * t2, t1 * (1 - t2), (1 - t1) * t2, (1 - t1) * (1 - t2)])


def payoff_vectors(eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e1c, e1d = eta[0]
    e2c, e2d = eta[1]
    r1 = np.array([-1 + e2c, -3 + e2c, 0 + e2d, -2 + e2d])
    r2 = np.array([-1 + e1c, 0 + e1d, -3 + e1c, -2 + e1d])
    return r1, r2


def exact_value(state: ExactState, agent: int) -> float:
    """Discounted value of one agent under the current parameters."""
    if not state.gamma < 1.0:
        raise ValueError(f"gamma must be < 1, got {state.gamma}")
    p = joint_distribution(state.theta)
    r = payoff_vectors(state.eta)[agent]
    return float(p @ r) / (1.0 - state.gamma)


def policy_deltas(state: ExactState) -> np.ndarray:
    """Raw (pre-clamp) policy updates [d theta1, d theta2]."""
    scale = state.alpha / (1.0 - state.gamma)
    d1 = scale * (state.eta[1, 0] - state.eta[1, 1] - 1.0)
    d2 = scale * (state.eta[0, 0] - state.eta[0, 1] - 1.0)
    return np.array([d1, d2])


def incentive_deltas(state: ExactState) -> np.ndarray:
    """Raw (pre-clamp) incentive updates, shape (2, 2); the derivative of
    each agent's post-update value w.r.t. its incentive table reduces to the
    constant 2 times [1, -1]."""
    scale = 2.0 * state.beta * state.alpha / (1.0 - state.gamma) ** 2
    return np.tile(scale * np.array([1.0, -1.0]), (2, 1))


def exact_policy_step(state: ExactState) -> ExactState:
    theta = np.clip(state.theta + policy_deltas(state), THETA_CLAMP, 1.0 - THETA_CLAMP)
    return replace(state, theta=theta)


def exact_incentive_step(state: ExactState) -> ExactState:
    eta = np.clip(state.eta + incentive_deltas(state), 0.0, ETA_MAX)
    return replace(state, eta=eta)


def nash_condition(state: ExactState) -> bool:
    """True when both incentive tables make cooperation strictly dominant."""
    return bool(np.all(state.eta[:, 0] - state.eta[:, 1] - 1.0 > 0.0))


def cc_converged(state: ExactState, threshold: float = 0.99) -> bool:
    return bool(np.all(state.theta >= threshold)) and nash_condition(state)


@dataclass
class DynamicsResult:
    converged: bool
    steps_to_converge: int | None
    thetas: np.ndarray  # (steps+1, 2)
    etas: np.ndarray  # (steps+1, 2, 2)


def run_exact_dynamics(state: ExactState, steps: int) -> DynamicsResult:
    """Iterate simultaneous policy/incentive updates; both new values are
    computed from the current state and committed together."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    thetas = [state.theta.copy()]
    etas = [state.eta.copy()]
    converged_at = 0 if cc_converged(state) else None
    for k in range(steps):
        new_theta = exact_policy_step(state).theta
        new_eta = exact_incentive_step(state).eta
        state = replace(state, theta=new_theta, eta=new_eta)
        thetas.append(state.theta.copy())
        etas.append(state.eta.copy())
        if converged_at is None and cc_converged(state):
            converged_at = k + 1
    return DynamicsResult(
        converged=converged_at is not None,
        steps_to_converge=converged_at,
        thetas=np.array(thetas),
        etas=np.array(etas),
    )


def modified_payoff_matrices(state: ExactState):
    """2x2 payoff matrices (row = own action C/D) that each agent faces once
    the opponent's incentives are folded in."""
    e1c, e1d = state.eta[0]
    e2c, e2d = state.eta[1]
    m1 = np.array([[-1 + e2c, -3 + e2c], [0 + e2d, -2 + e2d]])
    m2 = np.array([[-1 + e1c, -3 + e1c], [0 + e1d, -2 + e1d]])
    return m1, m2


VECTOR_FIELD_HEADER = "theta2,eta1c,eta1d,dtheta2,deta1c,deta1d"


def vector_field(
    eta1c_values: np.ndarray,
    theta2_values: np.ndarray,
    eta1d: float,
    alpha: float = 0.01,
    beta: float = 0.01,
    gamma: float = 0.9,
) -> list[tuple[float, ...]]:
    """Raw update vectors on a grid over (eta1_C, theta2) at fixed eta1_D.

    Each row is (theta2, eta1c, eta1d, dtheta2, deta1c, deta1d) using the
    pre-clamp update maps; theta1 and agent 2's incentives do not enter
    these components, so the field is exact for any values of those.
    """
    if len(eta1c_values) < 2 or len(theta2_values) < 2:
        raise ValueError("grid must be at least 2x2")
    rows = []
    for t2 in theta2_values:
        for e1c in eta1c_values:
            state = ExactState.make(0.5, t2, eta1=(e1c, eta1d), alpha=alpha, beta=beta, gamma=gamma)
            dtheta2 = policy_deltas(state)[1]
            deta = incentive_deltas(state)[0]
            rows.append((float(t2), float(e1c), float(eta1d), float(dtheta2), float(deta[0]), float(deta[1])))
    return rows


def write_vector_field_csv(rows, fileobj) -> None:
    fileobj.write(VECTOR_FIELD_HEADER + "\n")
    for row in rows:
        fileobj.write(",".join(f"{v:.6g}" for v in row) + "\n")


def vector_field_csv(rows) -> str:
    buf = io.StringIO()
    write_vector_field_csv(rows, buf)
    return buf.getvalue()
