"""Reverse-mode automatic differentiation over numpy arrays.

The tape is the implicit graph of `Tensor` nodes built while the forward
pass runs: each node records its parents and a vector-Jacobian product
closure. `Tensor.backward()` seeds the scalar output with 1 and walks the
graph once in reverse topological order, accumulating `.grad` on every
node that requires a gradient.

All tape arithmetic is float64; inference paths that want float32 should
use plain numpy outside the tape.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, ShapeError

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """One node on the tape: a value plus how to push gradients to its parents."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_vjp")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        vjp: Callable[[Array], tuple[Array | None, ...]] | None = None,
        op: str = "leaf",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.op = op
        self._parents = parents
        self._vjp = vjp

    # ---- graph traversal ----

    def _topo_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        return order

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into `.grad` for every reachable node.

        `self` must hold a single scalar. Each node's vjp runs exactly once.
        """
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar output, got shape {self.data.shape}")
        if not self.requires_grad:
            return
        self.grad = np.ones_like(self.data)
        for node in reversed(self._topo_order()):
            if node._vjp is None or node.grad is None:
                continue
            grads = node._vjp(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g.copy() if g.base is not None or g is node.grad else g
                else:
                    parent.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    # ---- convenience ----

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operators
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(constant(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    # method-style spellings of the module ops, for readable loss code
    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def clip(self, lo: float, hi: float):
        return clip(self, lo, hi)

    def tsum(self, axis: int | None = None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def tmean(self, axis: int | None = None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def min_along(self, axis: int):
        return min_along(self, axis)


def constant(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False, op="const")


def parameter(value) -> Tensor:
    """Leaf tensor that collects gradients. Shares storage with `value` when float64."""
    t = Tensor(value, requires_grad=True, op="param")
    return t


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else constant(value)


# ---- elementwise arithmetic ----


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def vjp(g: Array):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(out, parents=(a, b), vjp=vjp, op="add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def vjp(g: Array):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return Tensor(out, parents=(a, b), vjp=vjp, op="sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def vjp(g: Array):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return Tensor(out, parents=(a, b), vjp=vjp, op="mul")


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data

    def vjp(g: Array):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return Tensor(out, parents=(a, b), vjp=vjp, op="div")


def neg(a: Tensor) -> Tensor:
    def vjp(g: Array):
        return (-g,)

    return Tensor(-a.data, parents=(a,), vjp=vjp, op="neg")


def power(a: Tensor, exponent: float) -> Tensor:
    if isinstance(exponent, Tensor):
        raise ShapeError("only constant exponents are supported")
    e = float(exponent)
    out = a.data**e

    def vjp(g: Array):
        return (g * e * a.data ** (e - 1.0),)

    return Tensor(out, parents=(a,), vjp=vjp, op="pow")


# ---- nonlinearities ----


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def vjp(g: Array):
        return (g * (1.0 - out * out),)

    return Tensor(out, parents=(a,), vjp=vjp, op="tanh")


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))

    def vjp(g: Array):
        return (g * out * (1.0 - out),)

    return Tensor(out, parents=(a,), vjp=vjp, op="sigmoid")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def vjp(g: Array):
        return (g * out,)

    return Tensor(out, parents=(a,), vjp=vjp, op="exp")


def log(a: Tensor) -> Tensor:
    def vjp(g: Array):
        return (g / a.data,)

    return Tensor(np.log(a.data), parents=(a,), vjp=vjp, op="log")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)

    def vjp(g: Array):
        return (g * 0.5 / out,)

    return Tensor(out, parents=(a,), vjp=vjp, op="sqrt")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only through the unclipped region."""
    out = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)

    def vjp(g: Array):
        return (g * inside,)

    return Tensor(out, parents=(a,), vjp=vjp, op="clip")


# ---- linear algebra ----


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def vjp(g: Array):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return Tensor(out, parents=(a, b), vjp=vjp, op="matmul")


# ---- reductions and reshaping ----


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g: Array):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return Tensor(out, parents=(a,), vjp=vjp, op="sum")


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def take(a: Tensor, key) -> Tensor:
    """Indexing/slicing; backward scatter-adds into the source shape."""
    out = a.data[key]

    def vjp(g: Array):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return Tensor(out, parents=(a,), vjp=vjp, op="take")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat of an empty sequence")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g: Array):
        slicer = [slice(None)] * g.ndim
        grads = []
        for i in range(len(tensors)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(slicer)])
        return tuple(grads)

    return Tensor(out, parents=tuple(tensors), vjp=vjp, op="concat")


def min_along(a: Tensor, axis: int) -> Tensor:
    """Minimum along an axis; gradient flows to the (first) argmin entries."""
    idx = a.data.argmin(axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def vjp(g: Array):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (full,)

    return Tensor(out, parents=(a,), vjp=vjp, op="min_along")


def from_vjp(
    value: Array,
    parents: tuple[Tensor, ...],
    vjp: Callable[[Array], tuple[Array | None, ...]],
    op: str = "custom",
) -> Tensor:
    """Register a custom differentiable primitive (used by the analytic FK path)."""
    return Tensor(value, parents=parents, vjp=vjp, op=op)
