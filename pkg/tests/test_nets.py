"""Cross-checks between the three network-gradient routes: plain numpy,
closed-form per-row backprop, and the autodiff graph."""

import numpy as np
import pytest

from incentiverl import nets
from incentiverl.autodiff import Graph
from incentiverl.nets import MlpSpec

from conftest import central_diff, rel_error


@pytest.fixture(params=["relu", "tanh"])
def spec(request):
    return MlpSpec((4, 6, 5, 3), hidden=request.param)


def test_param_count(spec):
    assert spec.n_params == (4 + 1) * 6 + (6 + 1) * 5 + (5 + 1) * 3


def test_init_range(spec, rng):
    params = nets.init_params(spec, rng)
    assert params.shape == (spec.n_params,)
    assert np.all(np.abs(params) <= 0.1)


def test_forward_matches_graph(spec, rng):
    params = nets.init_params(spec, rng)
    x = rng.normal(size=(7, 4))
    plain = nets.forward(spec, params, x)
    g = Graph()
    theta = g.param("theta")
    out = nets.graph_forward(g, spec, theta, x)
    values = g.eval({"theta": params})
    np.testing.assert_allclose(plain, values[out.idx], rtol=1e-12)


def test_logprob_jacobian_matches_graph(spec, rng):
    params = nets.init_params(spec, rng)
    obs = rng.normal(size=(6, 4))
    actions = rng.integers(3, size=6)
    J, logp, probs = nets.logprob_jacobian(spec, params, obs, actions)
    assert J.shape == (6, spec.n_params)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    for t in range(6):
        g = Graph()
        theta = g.param("theta")
        logits = nets.graph_forward(g, spec, theta, obs[t : t + 1])
        lp = g.sum(g.pick(g.log_softmax(logits), actions[t : t + 1]))
        grad = g.grad(lp, theta, bindings={"theta": params})
        assert rel_error(J[t], grad) < 1e-10
        assert logp[t] == pytest.approx(float(g.eval({"theta": params})[lp.idx]))


def test_logprob_jacobian_matches_finite_differences(rng):
    spec = MlpSpec((3, 8, 2), hidden="tanh")
    params = nets.init_params(spec, rng)
    obs = rng.normal(size=(4, 3))
    actions = rng.integers(2, size=4)
    weights = rng.normal(size=4)
    J, _, _ = nets.logprob_jacobian(spec, params, obs, actions)

    def f(p):
        logits = nets.forward(spec, p, obs)
        lp = nets.log_softmax(logits)[np.arange(4), actions]
        return float(lp @ weights)

    assert rel_error(J.T @ weights, central_diff(f, params)) < 1e-5


def test_entropy_grad_matches_finite_differences(rng):
    spec = MlpSpec((3, 6, 4), hidden="tanh")
    params = nets.init_params(spec, rng)
    obs = rng.normal(size=(5, 3))
    ent, grad = nets.entropy_grad(spec, params, obs)

    def f(p):
        probs = nets.policy_probs(spec, p, obs)
        return float(-(probs * np.log(probs)).sum())

    assert ent == pytest.approx(f(params))
    assert rel_error(grad, central_diff(f, params)) < 1e-5


def test_value_grads_match_finite_differences(rng):
    spec = MlpSpec((4, 6, 1))
    params = nets.init_params(spec, rng)
    obs = rng.normal(size=(5, 4))
    values, rows = nets.value_grads(spec, params, obs)
    coeff = rng.normal(size=5)

    def f(p):
        return float(nets.forward(spec, p, obs)[:, 0] @ coeff)

    np.testing.assert_allclose(values, nets.forward(spec, params, obs)[:, 0])
    assert rel_error(rows.T @ coeff, central_diff(f, params)) < 1e-5


def test_single_observation_forward(rng):
    spec = MlpSpec((4, 5, 2))
    params = nets.init_params(spec, rng)
    x = rng.normal(size=4)
    out = nets.forward(spec, params, x)
    assert out.shape == (2,)
    np.testing.assert_allclose(out, nets.forward(spec, params, x[None, :])[0])
