"""Dense tensors with a dynamically built reverse-mode differentiation graph.

Every op evaluates eagerly and returns a new ``Node`` that remembers its
parents and how to push an output gradient back into them. ``backward``
walks the graph once in reverse topological order. Gradients of leaves
(parameters and variables) accumulate across calls until cleared;
gradients of intermediate nodes are recomputed on every call.
"""
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .utils import JptdpError

Tensor = np.ndarray

_PRECISIONS = {
    "float64": np.float64,
    "float32": np.float32
}

_float_type = np.float64


class DimensionError(JptdpError):

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes

        described = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {described}")


class ContractError(JptdpError):
    pass


class NumericalError(JptdpError):
    pass


def set_precision(name: str) -> None:
    global _float_type

    try:
        _float_type = _PRECISIONS[name]
    except KeyError:
        raise ContractError(f"unknown precision '{name}', expected one of "
                            f"{', '.join(_PRECISIONS)}")


def float_type():
    return _float_type


class Node:
    __slots__ = ("value", "grad", "parents", "backward_rule", "op",
                 "requires_grad", "trainable", "touched_rows")

    def __init__(self,
                 value: Tensor,
                 parents: Sequence["Node"] = (),
                 op: str = "input",
                 trainable: bool = False):
        self.value = value
        self.grad: Optional[Tensor] = None
        self.parents = tuple(parents)
        self.backward_rule: Optional[Callable[[Tensor], None]] = None
        self.op = op
        self.trainable = trainable
        self.requires_grad = trainable or any(p.requires_grad
                                              for p in self.parents)
        self.touched_rows: Optional[set] = None

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.shape})"

    @property
    def shape(self):
        return self.value.shape

    def scalar(self) -> float:
        return float(self.value.reshape(-1)[0])

    def grad_buffer(self) -> Tensor:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        return self.grad

    def accumulate(self, g: Tensor) -> None:
        if self.requires_grad:
            self.grad_buffer()[...] += g

    def accumulate_row(self, index: int, g: Tensor) -> None:
        if not self.requires_grad:
            return

        self.grad_buffer()[index] += g

        if self.trainable:
            if self.touched_rows is None:
                self.touched_rows = set()
            self.touched_rows.add(index)


def _as_tensor(data) -> Tensor:
    return np.array(data, dtype=_float_type, ndmin=1)


def constant(data) -> Node:
    return Node(_as_tensor(data), op="constant")


def variable(data) -> Node:
    """A differentiable leaf that is not a model parameter"""
    return Node(_as_tensor(data), op="variable", trainable=True)


def zeros(size: int) -> Node:
    return Node(np.zeros(size, dtype=_float_type), op="constant")


def _node(value: Tensor, parents, op: str, rule) -> Node:
    out = Node(value, parents, op)

    if out.requires_grad:
        out.backward_rule = rule

    return out


def matvec(W: Node, x: Node) -> Node:
    if W.value.ndim != 2 or x.value.ndim != 1 \
            or W.shape[1] != x.shape[0]:
        raise DimensionError("matvec", W.shape, x.shape)

    def rule(g):
        W.accumulate(np.outer(g, x.value))
        x.accumulate(W.value.T @ g)

    return _node(W.value @ x.value, (W, x), "matvec", rule)


def linear_rows(X: Node, W: Node) -> Node:
    """X·Wᵀ: every row of X multiplied by W"""
    if X.value.ndim != 2 or W.value.ndim != 2 \
            or X.shape[1] != W.shape[1]:
        raise DimensionError("linear_rows", X.shape, W.shape)

    def rule(g):
        X.accumulate(g @ W.value)
        W.accumulate(g.T @ X.value)

    return _node(X.value @ W.value.T, (X, W), "linear_rows", rule)


def add(a: Node, b: Node) -> Node:
    """Elementwise sum; a vector b is also added to every row of a matrix a"""
    row_broadcast = a.value.ndim == 2 and b.value.ndim == 1 \
        and a.shape[1] == b.shape[0]

    if a.shape != b.shape and not row_broadcast:
        raise DimensionError("add", a.shape, b.shape)

    def rule(g):
        a.accumulate(g)
        b.accumulate(g.sum(axis=0) if row_broadcast else g)

    return _node(a.value + b.value, (a, b), "add", rule)


def sub(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise DimensionError("sub", a.shape, b.shape)

    def rule(g):
        a.accumulate(g)
        b.accumulate(-g)

    return _node(a.value - b.value, (a, b), "sub", rule)


def concat(*nodes: Node) -> Node:
    if not nodes or any(n.value.ndim != 1 for n in nodes):
        raise DimensionError("concat", *(n.shape for n in nodes))

    sizes = [n.shape[0] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def rule(g):
        for node, start, stop in zip(nodes, offsets[:-1], offsets[1:]):
            node.accumulate(g[start:stop])

    return _node(np.concatenate([n.value for n in nodes]), nodes,
                 "concat", rule)


def tanh(x: Node) -> Node:
    y = np.tanh(x.value)

    def rule(g):
        x.accumulate(g * (1.0 - y * y))

    return _node(y, (x,), "tanh", rule)


def logistic(x: Node) -> Node:
    # tanh form avoids overflow in exp for large |x|
    y = 0.5 * (np.tanh(0.5 * x.value) + 1.0)

    def rule(g):
        x.accumulate(g * y * (1.0 - y))

    return _node(y, (x,), "logistic", rule)


def elementwise_mul(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise DimensionError("elementwise_mul", a.shape, b.shape)

    def rule(g):
        a.accumulate(g * b.value)
        b.accumulate(g * a.value)

    return _node(a.value * b.value, (a, b), "elementwise_mul", rule)


def pick_row(M: Node, i: int) -> Node:
    if M.value.ndim != 2 or not 0 <= i < M.shape[0]:
        raise DimensionError("pick_row", M.shape, (i,))

    def rule(g):
        M.accumulate_row(i, g)

    return _node(M.value[i].copy(), (M,), "pick_row", rule)


def pick(x: Node, i: int) -> Node:
    """Element i of a vector, as a shape [1] node"""
    if x.value.ndim != 1 or not 0 <= i < x.shape[0]:
        raise DimensionError("pick", x.shape, (i,))

    def rule(g):
        x.grad_buffer()[i] += g[0]

    return _node(x.value[i:i + 1].copy(), (x,), "pick", rule)


def pick_cell(M: Node, i: int, j: int) -> Node:
    if M.value.ndim != 2 or not (0 <= i < M.shape[0] and 0 <= j < M.shape[1]):
        raise DimensionError("pick_cell", M.shape, (i, j))

    def rule(g):
        M.grad_buffer()[i, j] += g[0]

    return _node(M.value[i, j:j + 1].copy(), (M,), "pick_cell", rule)


def slice_vector(x: Node, start: int, stop: int) -> Node:
    if x.value.ndim != 1 or not 0 <= start < stop <= x.shape[0]:
        raise DimensionError("slice_vector", x.shape, (start, stop))

    def rule(g):
        x.grad_buffer()[start:stop] += g

    return _node(x.value[start:stop].copy(), (x,), "slice_vector", rule)


def columns(M: Node, start: int, stop: int) -> Node:
    if M.value.ndim != 2 or not 0 <= start < stop <= M.shape[1]:
        raise DimensionError("columns", M.shape, (start, stop))

    def rule(g):
        M.grad_buffer()[:, start:stop] += g

    return _node(M.value[:, start:stop].copy(), (M,), "columns", rule)


def stack(nodes: Sequence[Node]) -> Node:
    """Vectors of equal length as the rows of a matrix"""
    if not nodes or len({n.shape for n in nodes}) != 1 \
            or nodes[0].value.ndim != 1:
        raise DimensionError("stack", *(n.shape for n in nodes))

    def rule(g):
        for row, node in enumerate(nodes):
            node.accumulate(g[row])

    return _node(np.stack([n.value for n in nodes]), nodes, "stack", rule)


def pairwise_sum(A: Node, B: Node) -> Node:
    """Row i·q + j of the [p·q, k] result is A[i] + B[j]"""
    if A.value.ndim != 2 or B.value.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError("pairwise_sum", A.shape, B.shape)

    p, k = A.shape
    q = B.shape[0]

    def rule(g):
        g = g.reshape(p, q, k)
        A.accumulate(g.sum(axis=1))
        B.accumulate(g.sum(axis=0))

    value = (A.value[:, None, :] + B.value[None, :, :]).reshape(p * q, k)

    return _node(value, (A, B), "pairwise_sum", rule)


def reshape(x: Node, shape) -> Node:
    shape = tuple(shape)

    if len(shape) > 2 or int(np.prod(shape)) != x.value.size:
        raise DimensionError("reshape", x.shape, shape)

    def rule(g):
        x.accumulate(g.reshape(x.shape))

    return _node(x.value.reshape(shape), (x,), "reshape", rule)


def total(x: Node) -> Node:
    def rule(g):
        x.accumulate(np.full(x.shape, g[0], dtype=x.value.dtype))

    return _node(np.array([x.value.sum()], dtype=x.value.dtype), (x,),
                 "total", rule)


def esum(nodes: Sequence[Node]) -> Node:
    """Sum of same-shaped nodes; the zero scalar for an empty sequence"""
    if not nodes:
        return zeros(1)

    if len({n.shape for n in nodes}) != 1:
        raise DimensionError("esum", *(n.shape for n in nodes))

    def rule(g):
        for node in nodes:
            node.accumulate(g)

    return _node(np.sum([n.value for n in nodes], axis=0), nodes,
                 "esum", rule)


def neg_log_softmax(logits: Node, gold_index: int) -> Node:
    if logits.value.ndim != 1 or not 0 <= gold_index < logits.shape[0]:
        raise DimensionError("neg_log_softmax", logits.shape, (gold_index,))

    shifted = logits.value - logits.value.max()
    exp = np.exp(shifted)
    partition = exp.sum()
    probs = exp / partition

    def rule(g):
        local = probs.copy()
        local[gold_index] -= 1.0
        logits.accumulate(g[0] * local)

    value = np.array([np.log(partition) - shifted[gold_index]],
                     dtype=logits.value.dtype)

    return _node(value, (logits,), "neg_log_softmax", rule)


def maximum(a: Node, scalar: float) -> Node:
    """Elementwise max(a, scalar); the gradient flows where a > scalar"""
    mask = a.value > scalar

    def rule(g):
        a.accumulate(g * mask)

    return _node(np.maximum(a.value, scalar), (a,), "max", rule)


def gaussian_noise(x: Node,
                   sigma: float,
                   training: bool,
                   rng: np.random.Generator = None) -> Node:
    if sigma < 0:
        raise ContractError(f"gaussian_noise: negative sigma {sigma}")

    if not training or sigma == 0:
        return x

    noise = rng.normal(0.0, sigma, size=x.shape).astype(x.value.dtype)

    def rule(g):
        x.accumulate(g)

    return _node(x.value + noise, (x,), "gaussian_noise", rule)


def _topological_order(root: Node) -> List[Node]:
    order = []
    visited = set()
    stack = [(root, False)]

    while stack:
        node, expanded = stack.pop()

        if expanded:
            order.append(node)
            continue

        if id(node) in visited:
            continue
        visited.add(id(node))

        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    return order


def backward(loss: Node) -> None:
    if loss.shape != (1,):
        raise ContractError(f"backward needs a scalar loss of shape (1,), "
                            f"got {tuple(loss.shape)}")

    if not loss.requires_grad:
        return

    order = _topological_order(loss)

    for node in order:
        if node.parents:
            node.grad = None

    loss.accumulate(np.ones(1, dtype=loss.value.dtype))

    for node in reversed(order):
        if node.backward_rule is not None and node.grad is not None:
            node.backward_rule(node.grad)


class Parameter:
    """A trainable tensor with its Adam moment accumulators.

    Lookup tables are ``sparse``: Adam only touches the rows that received
    a gradient since the last update.
    """

    def __init__(self, name: str, value: Tensor, sparse: bool = False):
        value = np.array(value, dtype=_float_type)

        self.name = name
        self.sparse = sparse
        self.node = Node(value, op=f"param:{name}", trainable=True)
        self.adam_m = np.zeros_like(value)
        self.adam_v = np.zeros_like(value)
        self.step_count = 0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"

    @property
    def value(self) -> Tensor:
        return self.node.value

    @property
    def shape(self):
        return self.node.value.shape

    @property
    def grad(self) -> Optional[Tensor]:
        return self.node.grad

    def assign(self, value: Tensor) -> None:
        value = np.asarray(value)

        if value.shape != self.shape:
            raise DimensionError(f"assign '{self.name}'", self.shape,
                                 value.shape)

        self.node.value = value.astype(self.node.value.dtype, copy=True)

    def clear_gradient(self) -> None:
        self.node.grad = None
        self.node.touched_rows = None


def clear_gradients(params: Iterable[Parameter]) -> None:
    for p in params:
        p.clear_gradient()


def adam_update(params: Sequence[Parameter],
                lr: float = 0.001,
                beta1: float = 0.9,
                beta2: float = 0.999,
                eps: float = 1e-8) -> None:
    for p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NumericalError(f"non-finite gradient in parameter "
                                 f"'{p.name}'")

    for p in params:
        p.step_count += 1

        g = p.grad
        if g is None:
            continue

        if p.sparse:
            if not p.node.touched_rows:
                p.clear_gradient()
                continue
            index = np.fromiter(sorted(p.node.touched_rows), dtype=np.int64)
            g = g[index]
        else:
            index = slice(None)

        t = p.step_count
        m = beta1 * p.adam_m[index] + (1.0 - beta1) * g
        v = beta2 * p.adam_v[index] + (1.0 - beta2) * (g * g)
        p.adam_m[index] = m
        p.adam_v[index] = v

        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)

        p.node.value[index] -= lr * m_hat / (np.sqrt(v_hat) + eps)

        p.clear_gradient()


def named_values(params: Iterable[Parameter]) -> Dict[str, Tensor]:
    return {p.name: p.value.copy() for p in params}


__all__ = ("Tensor", "Node", "Parameter", "DimensionError", "ContractError",
           "NumericalError", "set_precision", "float_type", "constant",
           "variable", "zeros", "matvec", "linear_rows", "add", "sub",
           "concat", "tanh", "logistic", "elementwise_mul", "pick_row",
           "pick", "pick_cell", "slice_vector", "columns", "stack",
           "pairwise_sum", "reshape", "total", "esum", "neg_log_softmax",
           "maximum", "gaussian_noise", "backward", "adam_update",
           "clear_gradients", "named_values")
