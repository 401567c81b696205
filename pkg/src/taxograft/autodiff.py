"""Reverse-mode automatic differentiation over numpy arrays.

Everything is float64. A Tensor wraps an ndarray plus, when gradients
are required, the parent tensors and a closure that routes the upstream
gradient to them. backward() walks the graph once in reverse
topological order and accumulates into .grad, so calling it twice adds
gradients, matching the usual zero_grad/step optimizer loop.

Only the operations needed by the classifiers live here: matmul, add,
multiply, concatenate, row gather, rectifiers, tanh, sigmoid, softmax,
log softmax, log, dropout and squared norm. Each has a closed-form
gradient that the test suite checks against central finite differences.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum out the axes numpy broadcasting introduced or stretched."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        # Constants do not keep graph edges alive.
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # ---- graph traversal -------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad for every ancestor.

        self must be scalar shaped; the seed gradient is 1.
        """
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar tensor")
        if not self.requires_grad:
            raise ValueError("backward() on a tensor with no graph")
        order = _topo_order(self)
        _accum(self, np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # ---- arithmetic ------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def backward(g: Array) -> None:
            _accum(a, _unbroadcast(g, a.data.shape))
            _accum(b, _unbroadcast(g, b.data.shape))

        return Tensor(a.data + b.data, parents=(a, b), backward=backward)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        return self + (as_tensor(other) * -1.0)

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) + (self * -1.0)

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other

        def backward(g: Array) -> None:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

        return Tensor(a.data * b.data, parents=(a, b), backward=backward)

    __rmul__ = __mul__

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        a, b = self, other
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ValueError("matmul expects 2-D tensors")

        def backward(g: Array) -> None:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)

        return Tensor(a.data @ b.data, parents=(a, b), backward=backward)

    def transpose(self) -> "Tensor":
        a = self

        def backward(g: Array) -> None:
            _accum(a, g.T)

        return Tensor(a.data.T, parents=(a,), backward=backward)

    # ---- reductions ------------------------------------------------------

    def sum(self) -> "Tensor":
        a = self

        def backward(g: Array) -> None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())

        return Tensor(a.data.sum(), parents=(a,), backward=backward)

    def mean(self) -> "Tensor":
        return self.sum() * (1.0 / self.data.size)

    # ---- elementwise nonlinearities ---------------------------------------

    def relu(self) -> "Tensor":
        a = self
        mask = (a.data > 0).astype(np.float64)

        def backward(g: Array) -> None:
            _accum(a, g * mask)

        return Tensor(a.data * mask, parents=(a,), backward=backward)

    def leaky_relu(self, slope: float = 0.2) -> "Tensor":
        a = self
        factor = np.where(a.data > 0, 1.0, slope)

        def backward(g: Array) -> None:
            _accum(a, g * factor)

        return Tensor(a.data * factor, parents=(a,), backward=backward)

    def tanh(self) -> "Tensor":
        a = self
        out = np.tanh(a.data)

        def backward(g: Array) -> None:
            _accum(a, g * (1.0 - out * out))

        return Tensor(out, parents=(a,), backward=backward)

    def sigmoid(self) -> "Tensor":
        a = self
        out = 1.0 / (1.0 + np.exp(-a.data))

        def backward(g: Array) -> None:
            _accum(a, g * out * (1.0 - out))

        return Tensor(out, parents=(a,), backward=backward)

    def log(self) -> "Tensor":
        a = self

        def backward(g: Array) -> None:
            _accum(a, g / a.data)

        return Tensor(np.log(a.data), parents=(a,), backward=backward)

    def softmax(self, axis: int = -1) -> "Tensor":
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        expd = np.exp(shifted)
        out = expd / expd.sum(axis=axis, keepdims=True)

        def backward(g: Array) -> None:
            inner = (g * out).sum(axis=axis, keepdims=True)
            _accum(a, out * (g - inner))

        return Tensor(out, parents=(a,), backward=backward)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - logz

        def backward(g: Array) -> None:
            probs = np.exp(out)
            _accum(a, g - probs * g.sum(axis=axis, keepdims=True))

        return Tensor(out, parents=(a,), backward=backward)

    def squared_norm(self) -> "Tensor":
        """Sum of squared entries, as a scalar tensor."""
        return (self * self).sum()

    # ---- structural ops ---------------------------------------------------

    def take_rows(self, indices: Sequence[int]) -> "Tensor":
        """Gather rows of a 2-D tensor; repeated indices accumulate grads."""
        a = self
        idx = np.asarray(indices, dtype=np.intp)
        if a.data.ndim != 2:
            raise ValueError("take_rows expects a 2-D tensor")

        def backward(g: Array) -> None:
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            _accum(a, full)

        return Tensor(a.data[idx], parents=(a,), backward=backward)


class Parameter(Tensor):
    """Trainable leaf tensor with a stable name for optimizers and checkpoints."""

    __slots__ = ("name", "decay")

    def __init__(self, name: str, data, decay: bool = True):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.decay = decay

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty sequence")
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: Array) -> None:
        for child, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(child, piece)

    return Tensor(
        np.concatenate([t.data for t in tensors], axis=axis),
        parents=tuple(tensors),
        backward=backward,
    )


def dropout(t: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: kept units are scaled by 1/(1 - rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return t
    mask = (rng.random(t.data.shape) >= rate) / (1.0 - rate)
    return t * Tensor(mask)


def _accum(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order over the graph, leaves first."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
