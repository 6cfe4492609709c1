"""Dense float64 tensors with a reverse-mode computation graph.

Every differentiable operation returns a new :class:`Tensor` whose node
records its parents and a closure mapping the output gradient to one
gradient per parent. :func:`backward` walks the graph in reverse
topological order and accumulates into the ``grad`` field of leaves.

Shapes never broadcast, except through :func:`add_bias` and
:func:`add_channel_bias`. Mismatches raise :class:`DimensionError`.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_GRAD_ENABLED = True


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """An operation was called outside its contract."""


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (),
                 backward_fn: Callable | None = None, op: str = "leaf"):
        arr = np.array(data, dtype=DTYPE) if not isinstance(data, np.ndarray) \
            else np.ascontiguousarray(data, dtype=DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self):
        return backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # operator sugar; all routes go through the named ops below
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else add_scalar(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else add_scalar(self, -other)

    def __rsub__(self, other):
        return add_scalar(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=tuple(parents),
                      backward_fn=backward_fn, op=op)
    return Tensor(data, op=op)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------- elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (g * bd if a.requires_grad else None,
                                             g * ad if b.requires_grad else None), "mul")


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def add_scalar(a: Tensor, c: float) -> Tensor:
    return _make(a.data + float(c), (a,), lambda g: (g,), "add_scalar")


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2.0 * g * ad,), "square")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,), "log")


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x), evaluated without overflow."""
    ad = a.data
    e = np.exp(-np.abs(ad))
    out = np.maximum(ad, 0.0) + np.log1p(e)
    return _make(out, (a,), lambda g: (g * _sigmoid_from(ad, e),), "softplus")


def _sigmoid_from(x: np.ndarray, e: np.ndarray) -> np.ndarray:
    # e = exp(-|x|) never overflows
    r = 1.0 / (1.0 + e)
    return np.where(x >= 0, r, e * r)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return _sigmoid_from(x, np.exp(-np.abs(x)))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


ACTIVATIONS = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid}


def apply_activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ContractError(f"unknown activation {kind!r}; expected one of {sorted(ACTIVATIONS)}")
    return fn(x)


# ---------------------------------------------------------------- reductions / shape

def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    return _make(np.array(a.data.sum()), (a,),
                 lambda g: (np.full(shape, np.asarray(g).reshape(-1)[0]),), "sum")


def mean(a: Tensor) -> Tensor:
    n = a.size
    return scale(sum(a), 1.0 / n)


def sum_rows(a: Tensor) -> Tensor:
    """Sum over all axes but the first: [batch, ...] -> [batch]."""
    shape = a.shape
    out = a.data.reshape(shape[0], -1).sum(axis=1)
    return _make(out, (a,),
                 lambda g: (np.broadcast_to(g.reshape((-1,) + (1,) * (len(shape) - 1)), shape).copy(),),
                 "sum_rows")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError(f"reshape: cannot view {old} as {tuple(shape)}")
    return _make(out, (a,), lambda g: (g.reshape(old),), "reshape")


def split_cols(a: Tensor, k: int) -> tuple[Tensor, Tensor]:
    """Split a [m, n] tensor into its first k columns and the remainder."""
    if a.ndim != 2 or not 0 < k < a.shape[1]:
        raise DimensionError(f"split_cols: cannot split {a.shape} at column {k}")
    m, n = a.shape

    def left_bw(g):
        full = np.zeros((m, n))
        full[:, :k] = g
        return (full,)

    def right_bw(g):
        full = np.zeros((m, n))
        full[:, k:] = g
        return (full,)

    return (_make(a.data[:, :k].copy(), (a,), left_bw, "split_left"),
            _make(a.data[:, k:].copy(), (a,), right_bw, "split_right"))


# ---------------------------------------------------------------- linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T if a.requires_grad else None,
                                             ad.T @ g if b.requires_grad else None), "matmul")


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Row-wise bias addition: x[m, n] + b[n]."""
    if x.ndim != 2 or b.shape != (x.shape[1],):
        raise DimensionError(f"add_bias: bias {b.shape} does not match rows of {x.shape}")
    return _make(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=0)), "add_bias")


def add_channel_bias(x: Tensor, b: Tensor) -> Tensor:
    """Per-channel bias for [N, C, H, W] feature maps."""
    if x.ndim != 4 or b.shape != (x.shape[1],):
        raise DimensionError(f"add_channel_bias: bias {b.shape} does not match channels of {x.shape}")
    return _make(x.data + b.data[None, :, None, None], (x, b),
                 lambda g: (g, g.sum(axis=(0, 2, 3))), "add_channel_bias")


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add_bias(matmul(x, w), b)


# ---------------------------------------------------------------- backward pass

def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> list[np.ndarray] | None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

    Repeated calls accumulate; use :func:`zero_grads` between steps. When
    ``params`` is given, leaves that the loss does not reach receive a zero
    gradient and the list of their gradients is returned.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {}
    if loss.requires_grad:
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(_topological(loss)):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg
    if params is None:
        return None
    out = []
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        out.append(p.grad)
    return out


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
