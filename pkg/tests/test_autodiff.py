"""Engine contract: evaluation, reverse-mode gradients vs finite
differences, and differentiation through in-graph update expressions."""

import numpy as np
import pytest

from incentiverl.autodiff import (
    DetachedUpdateError,
    Graph,
    GradientContractError,
    NonFiniteError,
    ShapeMismatchError,
    UnboundLeafError,
    grad_through_update,
)

from conftest import central_diff, rel_error


def test_eval_square():
    g = Graph()
    x = g.leaf("x")
    y = g.square(x)
    values = g.eval({"x": 3.0})
    assert values[y.idx] == 9.0


def test_eval_product():
    g = Graph()
    x, y = g.leaf("x"), g.leaf("y")
    out = x * y
    assert g.eval({"x": 2.0, "y": 5.0})[out.idx] == 10.0


def test_eval_softmax_symmetry():
    g = Graph()
    x = g.leaf("x")
    s = g.softmax(x)
    values = g.eval({"x": np.zeros((1, 3))})
    np.testing.assert_allclose(values[s.idx], np.full((1, 3), 1 / 3))


def test_grad_square():
    g = Graph()
    x = g.leaf("x")
    y = g.square(x)
    assert g.grad(y, x, bindings={"x": 3.0}) == pytest.approx(6.0)


def test_grad_product():
    g = Graph()
    x, y = g.leaf("x"), g.leaf("y")
    out = x * y
    gx, gy = g.grad_multi(out, [x, y], bindings={"x": 2.0, "y": 5.0})
    assert gx == pytest.approx(5.0)
    assert gy == pytest.approx(2.0)


def test_grad_log_softmax_matches_finite_differences(rng):
    for _ in range(10):
        point = rng.normal(size=6)
        idx = int(rng.integers(3))

        def f(v):
            z = v.reshape(2, 3)
            ls = z - np.log(np.exp(z - z.max(-1, keepdims=True)).sum(-1, keepdims=True)) - z.max(-1, keepdims=True)
            return float(ls[:, idx].sum())

        g = Graph()
        x = g.leaf("x")
        out = g.sum(g.column(g.log_softmax(g.reshape(x, (2, 3))), idx))
        grad = g.grad(out, x, bindings={"x": point})
        assert rel_error(grad, central_diff(f, point)) < 1e-5


def test_grad_zero_when_independent():
    g = Graph()
    x, y = g.leaf("x"), g.leaf("y")
    out = g.sum(g.square(x))
    grad = g.grad(out, y, bindings={"x": np.ones(3), "y": np.ones(4)})
    np.testing.assert_array_equal(grad, np.zeros(4))


def test_grad_nonscalar_output_rejected():
    g = Graph()
    x = g.leaf("x")
    y = g.square(x)
    with pytest.raises(GradientContractError):
        g.grad(y, x, bindings={"x": np.ones(3)})


def test_eval_unbound_leaf():
    g = Graph()
    x = g.leaf("x")
    g.square(x)
    with pytest.raises(UnboundLeafError, match="x"):
        g.eval({})


def test_eval_shape_mismatch_names_node():
    g = Graph()
    a, b = g.leaf("a"), g.leaf("b")
    node = g.matmul(a, b)
    with pytest.raises(ShapeMismatchError, match=node.name):
        g.eval({"a": np.ones((2, 3)), "b": np.ones((4, 2))})


def test_eval_nonfinite_flagged():
    g = Graph()
    x = g.leaf("x")
    node = g.exp(x)
    with np.errstate(over="ignore"):
        with pytest.raises(NonFiniteError, match=node.name):
            g.eval({"x": 1e4})


def test_grad_through_update_analytic():
    # theta_hat = theta + beta * eta; J = theta_hat^2
    g = Graph()
    eta = g.param("eta")
    theta_hat = g.const(1.0) + g.scale(eta, 0.1)
    loss = g.square(theta_hat)
    grad = grad_through_update(g, loss, theta_hat, eta, bindings={"eta": 2.0})
    assert grad == pytest.approx(2 * 1.2 * 0.1)


def test_grad_through_update_zero_step_size():
    # eta is wired into the update with a zero coefficient: the path exists,
    # the gradient is legitimately zero
    g = Graph()
    eta = g.param("eta")
    theta_hat = g.const(1.0) + g.scale(eta, 0.0)
    loss = g.square(theta_hat)
    grad = grad_through_update(g, loss, theta_hat, eta, bindings={"eta": 2.0})
    assert grad == pytest.approx(0.0)


def test_grad_through_update_detached_is_an_error():
    g = Graph()
    eta = g.param("eta")
    g.square(eta)  # eta used elsewhere, but the update ignores it
    theta_hat = g.const(1.0) + g.const(0.3)
    loss = g.square(theta_hat)
    with pytest.raises(DetachedUpdateError):
        grad_through_update(g, loss, theta_hat, eta, bindings={"eta": 2.0})


def test_grad_through_update_loss_must_consume_update():
    g = Graph()
    eta = g.param("eta")
    theta_hat = g.const(1.0) + g.scale(eta, 0.1)
    loss = g.square(g.const(2.0))
    with pytest.raises(DetachedUpdateError):
        grad_through_update(g, loss, theta_hat, eta, bindings={"eta": 2.0})


def _random_op_graph(op_name, rng):
    """A scalar-valued graph exercising one op, with a random binding."""
    g = Graph()
    x = g.leaf("x")
    if op_name == "matmul":
        a = g.reshape(x, (3, 4))
        out = g.sum(g.matmul(a, g.const(rng.normal(size=(4, 2)))))
        binding = rng.normal(size=12)
    elif op_name == "pick":
        a = g.reshape(x, (4, 3))
        out = g.sum(g.pick(a, rng.integers(3, size=4)))
        binding = rng.normal(size=12)
    elif op_name == "column":
        a = g.reshape(x, (4, 3))
        out = g.sum(g.column(a, int(rng.integers(3))))
        binding = rng.normal(size=12)
    elif op_name == "segment":
        out = g.sum(g.square(g.segment(x, 2, 7)))
        binding = rng.normal(size=10)
    elif op_name in ("softmax", "log_softmax"):
        a = g.reshape(x, (2, 4))
        node = g.softmax(a) if op_name == "softmax" else g.log_softmax(a)
        out = g.sum(g.mul(node, g.const(rng.normal(size=(2, 4)))))
        binding = rng.normal(size=8)
    elif op_name in ("mul", "add", "sub"):
        y = g.const(rng.normal(size=5) + 2.0)
        node = getattr(g, op_name)(x, y)
        out = g.sum(g.square(node))
        binding = rng.normal(size=5)
    elif op_name == "broadcast_add":
        a = g.reshape(x, (3, 4))
        out = g.sum(g.square(g.add(a, g.const(rng.normal(size=4)))))
        binding = rng.normal(size=12)
    elif op_name == "abs":
        out = g.sum(g.abs(x))
        binding = rng.normal(size=6) + np.sign(rng.normal(size=6)) * 0.5
    elif op_name == "log":
        out = g.sum(g.log(g.add(g.square(x), g.const(0.5))))
        binding = rng.normal(size=5)
    elif op_name == "scale":
        out = g.sum(g.square(g.scale(x, 1.7)))
        binding = rng.normal(size=5)
    else:
        node = getattr(g, op_name)(x)
        out = g.sum(g.mul(node, g.const(rng.normal(size=5))))
        binding = rng.normal(size=5)
    return g, x, out, binding


OPS = [
    "add",
    "sub",
    "mul",
    "broadcast_add",
    "neg",
    "scale",
    "matmul",
    "sum",
    "exp",
    "log",
    "tanh",
    "relu",
    "sigmoid",
    "abs",
    "square",
    "softmax",
    "log_softmax",
    "pick",
    "column",
    "segment",
]


@pytest.mark.parametrize("op_name", OPS)
def test_op_gradients_match_finite_differences(op_name, rng):
    if op_name in ("neg", "scale", "sum"):
        # covered via composite graphs; direct scalar-weighted version here
        pass
    for _ in range(5):
        g, x, out, binding = _random_op_graph(op_name, rng)
        grad = g.grad(out, x, bindings={"x": binding})

        def f(v):
            return float(g.eval({"x": v})[out.idx])

        fd = central_diff(f, binding)
        assert rel_error(grad, fd) < 1e-4, op_name


def test_deterministic_evaluation(rng):
    g = Graph()
    x = g.leaf("x")
    out = g.sum(g.tanh(g.matmul(g.reshape(x, (4, 5)), g.const(rng.normal(size=(5, 3))))))
    binding = rng.normal(size=20)
    v1 = g.eval({"x": binding})[out.idx]
    v2 = g.eval({"x": binding})[out.idx]
    g1 = g.grad(out, x, bindings={"x": binding})
    g2 = g.grad(out, x, bindings={"x": binding})
    assert v1 == v2
    np.testing.assert_array_equal(g1, g2)


def test_has_path():
    g = Graph()
    x, y = g.leaf("x"), g.leaf("y")
    a = g.square(x)
    b = g.add(a, g.const(1.0))
    c = g.square(y)
    assert g.has_path(x, b)
    assert not g.has_path(y, b)
    assert g.has_path(y, c)
