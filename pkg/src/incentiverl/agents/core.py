"""Shared agent machinery.

Policy learning throughout is plain gradient ascent on a log-likelihood
weighted by per-step scalars: discounted reward-to-go for the
policy-gradient learners and a one-step critic advantage for the
actor-critic learners.  The per-step weight is the only place an incentive
can enter a recipient's update, so `PendingUpdate` captures everything a
reward-giving agent needs to rebuild that update symbolically: the per-step
log-probability Jacobian, the learning-rate/clip coefficient, the
weight-independent additive part (entropy bonus), and the weight kind.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .. import nets
from ..autodiff import Graph, Node
from ..nets import MlpSpec
from ..optim import Adam, clip_global_norm

CLIP_NORM = 10.0


def discounted_suffix(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """G[t] = sum_{l>=t} gamma^(l-t) r[l] within one episode."""
    out = np.empty_like(rewards, dtype=np.float64)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


_DISCOUNT_MATRICES: dict[tuple[int, float], np.ndarray] = {}


def discount_matrix(T: int, gamma: float) -> np.ndarray:
    """Upper-triangular (T, T) matrix with [t, l] = gamma^(l-t) for l >= t,
    so that G = M @ r gives the discounted suffix sums."""
    key = (T, gamma)
    if key not in _DISCOUNT_MATRICES:
        t = np.arange(T)
        M = np.triu(gamma ** (t[None, :] - t[:, None]))
        _DISCOUNT_MATRICES[key] = M
    return _DISCOUNT_MATRICES[key]


def behavioral_probs(probs: np.ndarray, eps: float) -> np.ndarray:
    """Mix the learned policy with uniform: (1-eps) pi + eps/|A|."""
    return (1.0 - eps) * probs + eps / probs.shape[-1]


def sample_from(probs: np.ndarray, rng: np.random.Generator) -> int:
    return int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))


@dataclass
class PendingUpdate:
    """A staged policy update theta_hat = base + coef * (J^T w + extra),
    where w is the per-step weight vector the giver may rebuild as a graph
    expression of its incentive parameters."""

    spec: MlpSpec
    base_theta: np.ndarray
    theta_hat: np.ndarray
    J: np.ndarray  # (T, n_params) per-step log-prob Jacobian at base_theta
    coef: float  # learning rate times any clip scale applied
    extra: np.ndarray  # weight-independent additive gradient term
    kind: str  # "return" (discounted suffix of w) or "advantage" (w as is)
    bootstrap: np.ndarray | None = None  # advantage: value terms per step


class PolicyCore:
    """Softmax policy over flat parameters with the shared update math."""

    def __init__(
        self,
        spec: MlpSpec,
        rng: np.random.Generator,
        lr: float,
        entropy_coef: float = 0.0,
    ):
        self.spec = spec
        self.theta = nets.init_params(spec, rng)
        self.lr = lr
        self.entropy_coef = entropy_coef
        self.clip_events = 0

    @property
    def n_actions(self) -> int:
        return self.spec.sizes[-1]

    def probs(self, obs: np.ndarray, theta=None) -> np.ndarray:
        return nets.policy_probs(self.spec, self.theta if theta is None else theta, obs)

    def act(self, obs: np.ndarray, eps: float, rng: np.random.Generator) -> int:
        return sample_from(behavioral_probs(self.probs(obs), eps), rng)

    def build_update(self, obs: np.ndarray, actions: np.ndarray, weights: np.ndarray, kind: str, bootstrap=None) -> PendingUpdate:
        """Stage theta_hat = theta + lr * (J^T weights + entropy term), with a
        global-norm clip folded into the coefficient so that the staged value
        and its symbolic reconstruction agree exactly."""
        J, _, _ = nets.logprob_jacobian(self.spec, self.theta, obs, actions)
        extra = np.zeros_like(self.theta)
        if self.entropy_coef:
            _, egrad = nets.entropy_grad(self.spec, self.theta, obs)
            extra = self.entropy_coef * egrad
        f = J.T @ weights + extra
        if not np.all(np.isfinite(f)):
            raise FloatingPointError("non-finite policy gradient")
        _, scale = clip_global_norm(f, CLIP_NORM)
        if scale != 1.0:
            self.clip_events += 1
        coef = self.lr * scale
        theta_hat = self.theta + coef * f
        return PendingUpdate(
            spec=self.spec,
            base_theta=self.theta.copy(),
            theta_hat=theta_hat,
            J=J,
            coef=coef,
            extra=extra,
            kind=kind,
            bootstrap=bootstrap,
        )


def incentive_forward(
    spec: MlpSpec, eta: np.ndarray, x: np.ndarray, r_max: float, self_index: int
) -> np.ndarray:
    """Incentive-network output in [0, r_max] with the self slot forced to 0."""
    z = nets.forward(spec, eta, x)
    out = r_max / (1.0 + np.exp(-z))
    out[..., self_index] = 0.0
    return out


def incentive_graph_forward(
    g: Graph, spec: MlpSpec, eta: Node, x: np.ndarray, r_max: float, self_index: int
) -> Node:
    """Graph twin of `incentive_forward`."""
    logits = nets.graph_forward(g, spec, eta, x)
    scaled = g.scale(g.sigmoid(logits), r_max)
    mask = np.ones(spec.sizes[-1])
    mask[self_index] = 0.0
    return g.mul(scaled, g.const(mask))


def onehot_action_encoder(n_actions: int, n_agents: int):
    """Encode all other agents' discrete actions as concatenated one-hots,
    ordered by agent index with the observer skipped."""

    def encode(actions, self_index: int) -> np.ndarray:
        out = np.zeros((n_agents - 1) * n_actions)
        slot = 0
        for k in range(n_agents):
            if k == self_index:
                continue
            out[slot * n_actions + int(actions[k])] = 1.0
            slot += 1
        return out

    encode.dim = (n_agents - 1) * n_actions
    return encode


def beam_action_encoder(clean_action: int, n_agents: int):
    """Multi-hot over agents that fired their cleaning beam (self zeroed)."""

    def encode(actions, self_index: int) -> np.ndarray:
        out = np.zeros(n_agents)
        for k in range(n_agents):
            if k != self_index and int(actions[k]) == clean_action:
                out[k] = 1.0
        return out

    encode.dim = n_agents
    return encode


CHECKPOINT_VERSION = 1


def save_checkpoint(path, algo: str, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Versioned flat-vector blob with architecture metadata."""
    header = json.dumps({"version": CHECKPOINT_VERSION, "algo": algo, "meta": meta}, sort_keys=True)
    np.savez(path, __header__=np.frombuffer(header.encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> tuple[str, dict[str, np.ndarray], dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode())
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        arrays = {k: data[k] for k in data.files if k != "__header__"}
    return header["algo"], arrays, header["meta"]
