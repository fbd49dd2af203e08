"""Reverse-mode automatic differentiation over small dense computation graphs.

The engine is deliberately minimal: float64 numpy values, a flat list of
nodes in construction (= topological) order, and one reverse sweep per
gradient.  Its one distinguishing feature is first-class support for losses
that contain a gradient-step expression inside them: if ``theta_hat`` is
built in-graph as ``theta + lr * f(eta)``, then differentiating a loss that
consumes ``theta_hat`` with respect to ``eta`` follows the path through the
update step.  ``grad_through_update`` wraps this and fails loudly when the
update expression is structurally detached from the parameters of interest,
because a silently-zero gradient is the failure mode that matters here.
"""

from __future__ import annotations

import numpy as np


class GraphError(Exception):
    """Base class for computation-graph errors."""


class ShapeMismatchError(GraphError):
    """Operands of a node have incompatible shapes; names the node."""


class NonFiniteError(GraphError):
    """A node evaluated to NaN or +/-Inf; names the node."""


class GradientContractError(GraphError):
    """Gradient requested of a non-scalar output, or of a non-leaf."""


class DetachedUpdateError(GraphError):
    """The update expression has no structural path from the parameters."""


class UnboundLeafError(GraphError):
    """eval() was called without a binding for some leaf."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Node:
    """One operation (or leaf) in a Graph.  Create via Graph methods."""

    __slots__ = ("graph", "idx", "op", "parents", "meta", "name")

    def __init__(self, graph, idx, op, parents, meta, name):
        self.graph = graph
        self.idx = idx
        self.op = op
        self.parents = parents
        self.meta = meta
        self.name = name

    def __repr__(self):
        return f"Node({self.name}:{self.op})"

    # Operator sugar; raw arrays/scalars are wrapped as constants.
    def __add__(self, other):
        return self.graph.add(self, self.graph.as_node(other))

    def __radd__(self, other):
        return self.graph.add(self.graph.as_node(other), self)

    def __sub__(self, other):
        return self.graph.sub(self, self.graph.as_node(other))

    def __rsub__(self, other):
        return self.graph.sub(self.graph.as_node(other), self)

    def __mul__(self, other):
        return self.graph.mul(self, self.graph.as_node(other))

    def __rmul__(self, other):
        return self.graph.mul(self.graph.as_node(other), self)

    def __matmul__(self, other):
        return self.graph.matmul(self, self.graph.as_node(other))

    def __neg__(self):
        return self.graph.neg(self)


class Graph:
    """A DAG of numpy operations with reverse-mode gradients.

    Leaves are either named inputs (``leaf``), named parameter vectors
    (``param``) or embedded constants.  Non-leaf nodes are appended after
    their parents, so the node list is always a valid topological order.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._bind_names: dict[str, Node] = {}
        self._consts: dict[int, np.ndarray] = {}

    # ------------------------------------------------------------------ #
    # construction

    def _new(self, op: str, parents: tuple, meta=None, name: str | None = None) -> Node:
        idx = len(self.nodes)
        node = Node(self, idx, op, parents, meta, name or f"{op}_{idx}")
        self.nodes.append(node)
        return node

    def leaf(self, name: str) -> Node:
        if name in self._bind_names:
            raise GraphError(f"duplicate leaf name {name!r}")
        node = self._new("leaf", (), name=name)
        self._bind_names[name] = node
        return node

    def param(self, name: str) -> Node:
        """A named flat parameter vector; bound at eval time like a leaf."""
        if name in self._bind_names:
            raise GraphError(f"duplicate parameter name {name!r}")
        node = self._new("param", (), name=name)
        self._bind_names[name] = node
        return node

    def const(self, value) -> Node:
        node = self._new("const", ())
        self._consts[node.idx] = np.asarray(value, dtype=np.float64)
        return node

    def as_node(self, value) -> Node:
        return value if isinstance(value, Node) else self.const(value)

    # elementwise / structural ops ------------------------------------- #

    def add(self, a: Node, b: Node) -> Node:
        return self._new("add", (a, b))

    def sub(self, a: Node, b: Node) -> Node:
        return self._new("sub", (a, b))

    def mul(self, a: Node, b: Node) -> Node:
        return self._new("mul", (a, b))

    def neg(self, a: Node) -> Node:
        return self._new("neg", (a,))

    def scale(self, a: Node, c: float) -> Node:
        return self._new("scale", (a,), meta=float(c))

    def matmul(self, a: Node, b: Node) -> Node:
        return self._new("matmul", (a, b))

    def sum(self, a: Node, axis: int | None = None) -> Node:
        return self._new("sum", (a,), meta=axis)

    def exp(self, a: Node) -> Node:
        return self._new("exp", (a,))

    def log(self, a: Node) -> Node:
        return self._new("log", (a,))

    def tanh(self, a: Node) -> Node:
        return self._new("tanh", (a,))

    def relu(self, a: Node) -> Node:
        return self._new("relu", (a,))

    def sigmoid(self, a: Node) -> Node:
        return self._new("sigmoid", (a,))

    def abs(self, a: Node) -> Node:
        return self._new("abs", (a,))

    def square(self, a: Node) -> Node:
        return self._new("square", (a,))

    def softmax(self, a: Node) -> Node:
        """Row softmax over the last axis."""
        return self._new("softmax", (a,))

    def log_softmax(self, a: Node) -> Node:
        """Row log-softmax over the last axis (numerically stable)."""
        return self._new("log_softmax", (a,))

    def pick(self, a: Node, idx) -> Node:
        """out[t] = a[t, idx[t]] for a 2-D node and an int index vector."""
        return self._new("pick", (a,), meta=np.asarray(idx, dtype=np.intp))

    def column(self, a: Node, j: int) -> Node:
        """out = a[:, j] for a 2-D node."""
        return self._new("column", (a,), meta=int(j))

    def segment(self, a: Node, lo: int, hi: int) -> Node:
        """out = a[lo:hi] for a 1-D node."""
        return self._new("segment", (a,), meta=(int(lo), int(hi)))

    def reshape(self, a: Node, shape: tuple) -> Node:
        return self._new("reshape", (a,), meta=tuple(shape))

    def add_n(self, terms: list[Node]) -> Node:
        if not terms:
            raise GraphError("add_n of empty list")
        out = terms[0]
        for t in terms[1:]:
            out = self.add(out, t)
        return out

    # ------------------------------------------------------------------ #
    # evaluation

    def eval(self, bindings: dict[str, np.ndarray], check_finite: bool = True) -> list:
        """Forward-evaluate every node; returns values indexed by node idx.

        Raises UnboundLeafError for missing bindings, ShapeMismatchError on
        inconsistent operand shapes (naming the node) and NonFiniteError if
        any intermediate is NaN/Inf.
        """
        values: list = [None] * len(self.nodes)
        for node in self.nodes:
            op = node.op
            if op in ("leaf", "param"):
                if node.name not in bindings:
                    raise UnboundLeafError(f"no binding for {op} {node.name!r}")
                values[node.idx] = np.asarray(bindings[node.name], dtype=np.float64)
                continue
            if op == "const":
                values[node.idx] = self._consts[node.idx]
                continue
            ins = [values[p.idx] for p in node.parents]
            try:
                values[node.idx] = _FORWARD[op](ins, node.meta)
            except ValueError as exc:
                raise ShapeMismatchError(
                    f"node {node.name!r} ({op}): {exc}; operand shapes "
                    f"{[v.shape for v in ins]}"
                ) from exc
            if check_finite and not np.all(np.isfinite(values[node.idx])):
                raise NonFiniteError(f"node {node.name!r} ({op}) is not finite")
        return values

    # ------------------------------------------------------------------ #
    # gradients

    def grad(self, output: Node, wrt: Node, bindings=None, values=None) -> np.ndarray:
        """d(output)/d(wrt) by reverse accumulation.

        `output` must be scalar; `wrt` must be a leaf or param node.  The
        gradient is the zero vector when output does not depend on wrt.
        """
        (g,) = self.grad_multi(output, [wrt], bindings=bindings, values=values)
        return g

    def grad_multi(self, output: Node, wrts: list[Node], bindings=None, values=None) -> list[np.ndarray]:
        if values is None:
            if bindings is None:
                raise GraphError("grad needs either bindings or precomputed values")
            values = self.eval(bindings)
        for w in wrts:
            if w.op not in ("leaf", "param"):
                raise GradientContractError(f"wrt node {w.name!r} is not a leaf/param")
        out_val = values[output.idx]
        if np.ndim(out_val) != 0:
            raise GradientContractError(
                f"gradient output {output.name!r} must be scalar, got shape {np.shape(out_val)}"
            )
        adjoints: list = [None] * len(self.nodes)
        adjoints[output.idx] = np.asarray(1.0)
        for node in reversed(self.nodes[: output.idx + 1]):
            g = adjoints[node.idx]
            if g is None or node.op in ("leaf", "param", "const"):
                continue
            ins = [values[p.idx] for p in node.parents]
            parent_grads = _BACKWARD[node.op](g, ins, values[node.idx], node.meta)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None:
                    continue
                if adjoints[parent.idx] is None:
                    adjoints[parent.idx] = pg
                else:
                    adjoints[parent.idx] = adjoints[parent.idx] + pg
        out = []
        for w in wrts:
            if adjoints[w.idx] is None:
                out.append(np.zeros_like(values[w.idx]))
            else:
                out.append(adjoints[w.idx])
        return out

    def has_path(self, src: Node, dst: Node) -> bool:
        """True when a directed path src -> dst exists in the DAG."""
        if src.idx == dst.idx:
            return True
        reach = {src.idx}
        for node in self.nodes[src.idx + 1 : dst.idx + 1]:
            if any(p.idx in reach for p in node.parents):
                reach.add(node.idx)
        return dst.idx in reach


def grad_through_update(
    graph: Graph,
    loss: Node,
    update_exprs,
    wrt: Node,
    bindings=None,
    values=None,
) -> np.ndarray:
    """Gradient of `loss` w.r.t. `wrt` where `loss` consumes updated
    parameters built in-graph (``theta + lr * f(..., wrt)``).

    `update_exprs` is the updated-parameter node (or a list of them, one per
    recipient).  Each must be structurally reachable from `wrt`; a detached
    update would silently zero the exact gradient paths this function exists
    to capture, so that case raises DetachedUpdateError instead.
    """
    if isinstance(update_exprs, Node):
        update_exprs = [update_exprs]
    if not update_exprs:
        raise DetachedUpdateError("no update expressions supplied")
    for upd in update_exprs:
        if not graph.has_path(wrt, upd):
            raise DetachedUpdateError(
                f"update expression {upd.name!r} has no path from {wrt.name!r}; "
                "the parameter update was built detached from the incentive parameters"
            )
        if not graph.has_path(upd, loss):
            raise DetachedUpdateError(
                f"loss {loss.name!r} does not consume update expression {upd.name!r}"
            )
    return graph.grad(loss, wrt, bindings=bindings, values=values)


# ---------------------------------------------------------------------- #
# op tables


def _fw_matmul(ins, meta):
    a, b = ins
    return a @ b


def _bw_matmul(g, ins, val, meta):
    a, b = ins
    if a.ndim == 2 and b.ndim == 2:
        return (g @ b.T, a.T @ g)
    if a.ndim == 2 and b.ndim == 1:
        return (np.outer(g, b), a.T @ g)
    if a.ndim == 1 and b.ndim == 2:
        return (b @ g, np.outer(a, g))
    raise ShapeMismatchError(f"matmul on shapes {a.shape} and {b.shape}")


def _fw_softmax(ins, meta):
    (a,) = ins
    z = a - a.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _bw_softmax(g, ins, val, meta):
    dot = (g * val).sum(axis=-1, keepdims=True)
    return (val * (g - dot),)


def _fw_log_softmax(ins, meta):
    (a,) = ins
    z = a - a.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _bw_log_softmax(g, ins, val, meta):
    p = np.exp(val)
    return (g - p * g.sum(axis=-1, keepdims=True),)


def _fw_pick(ins, meta):
    (a,) = ins
    return a[np.arange(a.shape[0]), meta]


def _bw_pick(g, ins, val, meta):
    (a,) = ins
    out = np.zeros_like(a)
    np.add.at(out, (np.arange(a.shape[0]), meta), g)
    return (out,)


def _bw_column(g, ins, val, meta):
    (a,) = ins
    out = np.zeros_like(a)
    out[:, meta] = g
    return (out,)


def _bw_segment(g, ins, val, meta):
    (a,) = ins
    out = np.zeros_like(a)
    out[meta[0] : meta[1]] = g
    return (out,)


def _bw_sum(g, ins, val, meta):
    (a,) = ins
    if meta is None:
        return (np.broadcast_to(g, a.shape).copy(),)
    return (np.broadcast_to(np.expand_dims(g, meta), a.shape).copy(),)


_FORWARD = {
    "add": lambda ins, m: ins[0] + ins[1],
    "sub": lambda ins, m: ins[0] - ins[1],
    "mul": lambda ins, m: ins[0] * ins[1],
    "neg": lambda ins, m: -ins[0],
    "scale": lambda ins, m: ins[0] * m,
    "matmul": _fw_matmul,
    "sum": lambda ins, m: ins[0].sum(axis=m),
    "exp": lambda ins, m: np.exp(ins[0]),
    "log": lambda ins, m: np.log(ins[0]),
    "tanh": lambda ins, m: np.tanh(ins[0]),
    "relu": lambda ins, m: np.maximum(ins[0], 0.0),
    "sigmoid": lambda ins, m: 1.0 / (1.0 + np.exp(-ins[0])),
    "abs": lambda ins, m: np.abs(ins[0]),
    "square": lambda ins, m: ins[0] * ins[0],
    "softmax": _fw_softmax,
    "log_softmax": _fw_log_softmax,
    "pick": _fw_pick,
    "column": lambda ins, m: ins[0][:, m],
    "segment": lambda ins, m: ins[0][m[0] : m[1]],
    "reshape": lambda ins, m: ins[0].reshape(m),
}

_BACKWARD = {
    "add": lambda g, ins, v, m: (
        _unbroadcast(g, ins[0].shape),
        _unbroadcast(g, ins[1].shape),
    ),
    "sub": lambda g, ins, v, m: (
        _unbroadcast(g, ins[0].shape),
        _unbroadcast(-g, ins[1].shape),
    ),
    "mul": lambda g, ins, v, m: (
        _unbroadcast(g * ins[1], ins[0].shape),
        _unbroadcast(g * ins[0], ins[1].shape),
    ),
    "neg": lambda g, ins, v, m: (-g,),
    "scale": lambda g, ins, v, m: (g * m,),
    "matmul": _bw_matmul,
    "sum": _bw_sum,
    "exp": lambda g, ins, v, m: (g * v,),
    "log": lambda g, ins, v, m: (g / ins[0],),
    "tanh": lambda g, ins, v, m: (g * (1.0 - v * v),),
    "relu": lambda g, ins, v, m: (g * (ins[0] > 0.0),),
    "sigmoid": lambda g, ins, v, m: (g * v * (1.0 - v),),
    "abs": lambda g, ins, v, m: (g * np.sign(ins[0]),),
    "square": lambda g, ins, v, m: (2.0 * g * ins[0],),
    "softmax": _bw_softmax,
    "log_softmax": _bw_log_softmax,
    "pick": _bw_pick,
    "column": _bw_column,
    "segment": _bw_segment,
    "reshape": lambda g, ins, v, m: (g.reshape(ins[0].shape),),
}
