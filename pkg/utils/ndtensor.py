"""
Dense 64-bit tensors with tape-based reverse-mode differentiation.

Every differentiable operation appends a node to a Graph; backward walks the
tape from the loss node down to node 0. Parameters are leaf tensors: they are
never recorded on a tape, so the same parameter can take part in many
forward passes (one Graph each).
"""

import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ContractError, DimensionError

_state = threading.local()


def _graph_stack() -> List["Graph"]:
    if not hasattr(_state, "stack"):
        _state.stack = [Graph()]
        _state.grad_enabled = True
    return _state.stack


@dataclass
class Node:
    """One recorded operation: tag, input tensors, saved values and its vector-Jacobian product."""

    tag: str
    inputs: Tuple["Tensor", ...]
    input_ids: Tuple[Optional[int], ...]
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
    saved: Dict = field(default_factory=dict)


class Graph:
    """Append-only tape of operations for one forward pass."""

    def __init__(self):
        self.nodes: List[Node] = []

    def __enter__(self) -> "Graph":
        _graph_stack().append(self)
        return self

    def __exit__(self, *exc):
        _graph_stack().pop()
        return False

    def __len__(self) -> int:
        return len(self.nodes)

    @staticmethod
    def current() -> "Graph":
        return _graph_stack()[-1]

    def record(self, tag, inputs, backward, saved=None) -> int:
        ids = tuple(t.node_id if t.graph is self else None for t in inputs)
        self.nodes.append(Node(tag, tuple(inputs), ids, backward, saved or {}))
        return len(self.nodes) - 1


def grad_enabled() -> bool:
    _graph_stack()
    return _state.grad_enabled


@contextmanager
def no_grad():
    """Disable recording, e.g. for inference and finite differences."""
    _graph_stack()
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """N-dimensional float64 array that can take part in a differentiation graph."""

    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.graph: Optional[Graph] = None
        self.node_id: Optional[int] = None

    @classmethod
    def _wrap(cls, data: np.ndarray) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.requires_grad = False
        out.grad = None
        out.graph = None
        out.node_id = None
        return out

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, node_id={self.node_id})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self.node_id is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    # operators
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else shift(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else shift(self, -float(other))

    def __rsub__(self, other):
        return shift(scale(self, -1.0), float(other))

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division by a tensor is not supported")
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def record_op(data: np.ndarray, inputs: Sequence[Tensor], tag: str, backward_fn, saved=None) -> Tensor:
    """
    Wrap the result of a numpy computation as a tensor and record it on the tape.

    Args:
        data: Forward result
        inputs: Tensors the result depends on
        tag: Operation name stored on the node
        backward_fn: Maps the output gradient to one gradient (or None) per input
        saved: Optional activations kept on the node for inspection

    Returns:
        Result tensor, attached to a graph when any input requires a gradient
    """
    out = Tensor._wrap(data)
    if not grad_enabled() or not any(t.requires_grad for t in inputs):
        return out
    graphs = {id(t.graph): t.graph for t in inputs if t.graph is not None}
    if len(graphs) > 1:
        raise ContractError(f"operation '{tag}' mixes tensors from different graphs")
    graph = next(iter(graphs.values())) if graphs else Graph.current()
    out.requires_grad = True
    out.graph = graph
    out.node_id = graph.record(tag, inputs, backward_fn, saved)
    return out


def backward(loss: Tensor):
    """
    Accumulate dLoss/dT into .grad of every leaf tensor T that requires a gradient.

    Args:
        loss: Single-element tensor produced on a graph
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    seed = np.ones_like(loss.data)
    if loss.node_id is None:
        if loss.requires_grad:
            _accumulate_leaf(loss, seed)
        return

    graph = loss.graph
    pending: Dict[int, np.ndarray] = {loss.node_id: seed}
    for node_id in range(loss.node_id, -1, -1):
        grad = pending.pop(node_id, None)
        if grad is None:
            continue
        node = graph.nodes[node_id]
        input_grads = node.backward(grad)
        for tensor, input_id, input_grad in zip(node.inputs, node.input_ids, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue
            if input_id is None:
                _accumulate_leaf(tensor, input_grad)
            elif input_id in pending:
                pending[input_id] = pending[input_id] + input_grad
            else:
                pending[input_id] = input_grad


def _accumulate_leaf(tensor: Tensor, grad: np.ndarray):
    grad = np.asarray(grad, dtype=np.float64).reshape(tensor.shape)
    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad


def zero_grads(params: Iterable[Tensor]):
    """Reset accumulated gradients; call before every optimizer step."""
    for p in params:
        p.grad = None


def _check_same(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {list(a.shape)} vs {list(b.shape)}")


def _is_bias(a: Tensor, b: Tensor) -> bool:
    return b.ndim == 1 and a.ndim >= 1 and b.shape[0] == a.shape[-1] and a.shape != b.shape


def _reduce_to_bias(grad: np.ndarray) -> np.ndarray:
    return grad.reshape(-1, grad.shape[-1]).sum(axis=0)


# elementwise algebra

def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b for equal shapes, or a bias vector b added over the last axis of a."""
    if _is_bias(a, b):
        return record_op(a.data + b.data, (a, b), "add_bias", lambda g: (g, _reduce_to_bias(g)))
    _check_same(a, b, "add")
    return record_op(a.data + b.data, (a, b), "add", lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if _is_bias(a, b):
        return record_op(a.data - b.data, (a, b), "sub_bias", lambda g: (g, -_reduce_to_bias(g)))
    _check_same(a, b, "sub")
    return record_op(a.data - b.data, (a, b), "sub", lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; b may be a gain vector over the last axis of a."""
    if _is_bias(a, b):
        return record_op(
            a.data * b.data, (a, b), "mul_bias",
            lambda g: (g * b.data, _reduce_to_bias(g * a.data)),
        )
    _check_same(a, b, "mul")
    return record_op(a.data * b.data, (a, b), "mul", lambda g: (g * b.data, g * a.data))


def scale(x: Tensor, c: float) -> Tensor:
    return record_op(x.data * c, (x,), "scale", lambda g: (g * c,))


def shift(x: Tensor, c: float) -> Tensor:
    return record_op(x.data + c, (x,), "shift", lambda g: (g,))


def square(x: Tensor) -> Tensor:
    return record_op(x.data * x.data, (x,), "square", lambda g: (2.0 * g * x.data,))


def blend(a: Tensor, b: Tensor, alpha) -> Tensor:
    """
    alpha·a + (1−alpha)·b.

    alpha is either a float or a single-element tensor (learnable fusion weight).
    """
    _check_same(a, b, "blend")
    if not isinstance(alpha, Tensor):
        w = float(alpha)
        return record_op(w * a.data + (1.0 - w) * b.data, (a, b), "blend", lambda g: (g * w, g * (1.0 - w)))
    w = float(alpha.data.reshape(()))
    diff = a.data - b.data

    def backward_fn(g):
        return g * w, g * (1.0 - w), np.sum(g * diff).reshape(alpha.shape)

    return record_op(w * a.data + (1.0 - w) * b.data, (a, b, alpha), "blend", backward_fn)


# activations

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return record_op(np.where(mask, x.data, 0.0), (x,), "relu", lambda g: (g * mask,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    u = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(u)

    def backward_fn(g):
        du = _GELU_C * (1.0 + 3.0 * 0.044715 * x.data ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du),)

    return record_op(0.5 * x.data * (1.0 + t), (x,), "gelu", backward_fn)


def sin_act(x: Tensor, omega0: float) -> Tensor:
    """sin(omega0·x), the sinusoidal activation."""
    if omega0 <= 0:
        raise ContractError(f"omega0 must be positive, got {omega0}")
    z = omega0 * x.data
    return record_op(np.sin(z), (x,), "sin", lambda g: (g * omega0 * np.cos(z),), {"omega0": omega0})


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def backward_fn(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return record_op(y, (x,), "softmax", backward_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row over the last axis to zero mean / unit variance, then apply gain and bias."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(f"layer_norm: gain {list(gain.shape)} / bias {list(bias.shape)} vs rows of {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv

    def backward_fn(g):
        dxhat = g * gain.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return dx, _reduce_to_bias(g * xhat), _reduce_to_bias(g)

    return record_op(xhat * gain.data + bias.data, (x, gain, bias), "layer_norm", backward_fn)


# linear algebra and reductions

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product a·b.

    Both operands are 2D, or both have the same rank with identical leading
    (batch) dimensions.
    """
    ok = a.ndim >= 2 and a.ndim == b.ndim and a.shape[:-2] == b.shape[:-2] and a.shape[-1] == b.shape[-2]
    if not ok:
        raise DimensionError(f"matmul: cannot multiply {list(a.shape)} by {list(b.shape)}")

    def backward_fn(g):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return record_op(a.data @ b.data, (a, b), "matmul", backward_fn)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    y = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record_op(y, (x,), "sum", backward_fn)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return scale(sum_(x, axis, keepdims), 1.0 / count)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {list(x.shape)} as {list(shape)}") from None
    return record_op(y, (x,), "reshape", lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record_op(np.transpose(x.data, axes), (x,), "transpose", lambda g: (np.transpose(g, inverse),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    try:
        y = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[list(t.shape) for t in tensors]}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record_op(y, tensors, "concat", backward_fn)


def slice_(x: Tensor, key) -> Tensor:
    y = x.data[key]

    def backward_fn(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return (full,)

    return record_op(np.array(y, dtype=np.float64), (x,), "slice", backward_fn)


# finite differences

def numerical_gradient(fn: Callable[[], float], tensor: Tensor, index, h: float = 1e-5) -> float:
    """
    Central finite difference of fn() with respect to tensor.data[index].

    fn is evaluated with recording disabled; tensor.data is restored afterwards.
    """
    original = tensor.data[index]
    with no_grad():
        tensor.data[index] = original + h
        plus = fn()
        tensor.data[index] = original - h
        minus = fn()
    tensor.data[index] = original
    return (plus - minus) / (2.0 * h)


def relative_error(analytic: float, numeric: float, floor: float = 1e-5) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
