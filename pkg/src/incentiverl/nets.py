"""Small dense networks stored as flat float64 parameter vectors.

Everything that runs per environment step (action sampling, incentive
emission) uses the plain numpy forward pass here.  Learning updates use
either the closed-form per-row gradient helpers (`logprob_jacobian`,
`batch_param_grads`) or the graph forward (`graph_forward`), which rebuilds
the same network inside an autodiff Graph so updated parameters can stay
differentiable expressions.  Tests cross-check the three routes against
each other and against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Graph, Node


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes (input, hidden..., output) and hidden activation."""

    sizes: tuple[int, ...]
    hidden: str = "relu"  # "relu" or "tanh"

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise ValueError("MlpSpec needs at least input and output sizes")
        if self.hidden not in ("relu", "tanh"):
            raise ValueError(f"unknown hidden activation {self.hidden!r}")

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        return sum(
            (self.sizes[k] + 1) * self.sizes[k + 1] for k in range(self.n_layers)
        )

    def layout(self) -> list[tuple[int, int, tuple[int, int]]]:
        """Per layer: (weight offset, bias offset, weight shape)."""
        out, off = [], 0
        for k in range(self.n_layers):
            nin, nout = self.sizes[k], self.sizes[k + 1]
            out.append((off, off + nin * nout, (nin, nout)))
            off += (nin + 1) * nout
        return out


def init_params(spec: MlpSpec, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    """Uniform(-scale, scale) init for all weights and biases."""
    return rng.uniform(-scale, scale, size=spec.n_params)


def unpack(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    layers = []
    for w_off, b_off, shape in spec.layout():
        w = params[w_off:b_off].reshape(shape)
        b = params[b_off : b_off + shape[1]]
        layers.append((w, b))
    return layers


def _act(spec: MlpSpec, z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) if spec.hidden == "relu" else np.tanh(z)


def forward(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear-output forward pass; x is (batch, in) or (in,)."""
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    layers = unpack(spec, params)
    for w, b in layers[:-1]:
        h = _act(spec, h @ w + b)
    w, b = layers[-1]
    out = h @ w + b
    return out[0] if np.ndim(x) == 1 else out


def forward_cached(spec: MlpSpec, params: np.ndarray, x: np.ndarray):
    """Forward pass keeping per-layer inputs and pre-activations.

    Returns (logits, inputs, preacts) where inputs[k] is the batch fed into
    layer k and preacts[k] its pre-activation output.
    """
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    inputs, preacts = [], []
    layers = unpack(spec, params)
    for k, (w, b) in enumerate(layers):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        h = z if k == spec.n_layers - 1 else _act(spec, z)
    return preacts[-1], inputs, preacts


def batch_param_grads(
    spec: MlpSpec,
    params: np.ndarray,
    x: np.ndarray,
    out_deltas: np.ndarray,
    inputs=None,
    preacts=None,
) -> np.ndarray:
    """Per-row parameter gradients: result[t] = d(delta[t] . logits[t])/d(params).

    `out_deltas` is (batch, out): the gradient of each row's scalar loss with
    respect to that row's logits.  Rows are independent, which is exactly the
    per-time-step Jacobian needed when each step's policy-gradient term gets
    its own weight.
    """
    if inputs is None:
        _, inputs, preacts = forward_cached(spec, params, x)
    batch = out_deltas.shape[0]
    grads = np.empty((batch, spec.n_params))
    layout = spec.layout()
    delta = out_deltas
    for k in range(spec.n_layers - 1, -1, -1):
        w_off, b_off, shape = layout[k]
        h_in = inputs[k]
        grads[:, w_off:b_off] = np.einsum("ti,tj->tij", h_in, delta).reshape(batch, -1)
        grads[:, b_off : b_off + shape[1]] = delta
        if k > 0:
            w = params[w_off:b_off].reshape(shape)
            back = delta @ w.T
            z = preacts[k - 1]
            if spec.hidden == "relu":
                delta = back * (z > 0.0)
            else:
                delta = back * (1.0 - np.tanh(z) ** 2)
    return grads


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_probs(spec: MlpSpec, params: np.ndarray, obs: np.ndarray) -> np.ndarray:
    return softmax(forward(spec, params, obs))


def logprob_jacobian(
    spec: MlpSpec, params: np.ndarray, obs: np.ndarray, actions: np.ndarray
):
    """Per-step gradients of log softmax-policy probabilities.

    Returns (J, logp, probs) with J of shape (T, n_params) where
    J[t] = d log pi(actions[t] | obs[t]) / d params.
    """
    logits, inputs, preacts = forward_cached(spec, params, obs)
    probs = softmax(logits)
    T = obs.shape[0]
    deltas = -probs.copy()
    deltas[np.arange(T), actions] += 1.0
    J = batch_param_grads(spec, params, obs, deltas, inputs, preacts)
    logp = log_softmax(logits)[np.arange(T), actions]
    return J, logp, probs


def entropy_grad(spec: MlpSpec, params: np.ndarray, obs: np.ndarray):
    """(sum of per-step policy entropies, its gradient w.r.t. params)."""
    logits, inputs, preacts = forward_cached(spec, params, obs)
    logp = log_softmax(logits)
    p = np.exp(logp)
    ent = -(p * logp).sum(axis=-1)
    # dH/dz_k = -p_k (log p_k + H)
    deltas = -p * (logp + ent[:, None])
    grads = batch_param_grads(spec, params, obs, deltas, inputs, preacts)
    return ent.sum(), grads.sum(axis=0)


def value_grads(spec: MlpSpec, params: np.ndarray, obs: np.ndarray):
    """Scalar-output net: returns (values (T,), per-row gradient matrix)."""
    logits, inputs, preacts = forward_cached(spec, params, obs)
    ones = np.ones((obs.shape[0], 1))
    grads = batch_param_grads(spec, params, obs, ones, inputs, preacts)
    return logits[:, 0], grads


def graph_forward(g: Graph, spec: MlpSpec, theta: Node, x) -> Node:
    """Rebuild the linear-output forward pass as graph nodes.

    `theta` is a flat-vector node (possibly an update expression); `x` is a
    constant (T, in) batch or an existing node.
    """
    h = g.as_node(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    for k, (w_off, b_off, shape) in enumerate(spec.layout()):
        w = g.reshape(g.segment(theta, w_off, b_off), shape)
        b = g.segment(theta, b_off, b_off + shape[1])
        z = g.add(g.matmul(h, w), b)
        if k == spec.n_layers - 1:
            return z
        h = g.relu(z) if spec.hidden == "relu" else g.tanh(z)
    raise AssertionError("unreachable")
