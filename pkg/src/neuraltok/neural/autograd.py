"""A small reverse-mode automatic differentiation engine over numpy arrays.

Each operation returns a :class:`Tensor` that remembers its parents and a
closure propagating the output gradient back to them. Only the handful of
operators needed by the tagger and the task head are implemented.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ShapeError, StateError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward: Optional[Callable[[np.ndarray], None]] = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name!r})"

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate d(self)/d(leaf) into every leaf that requires a gradient."""
        if self.data.size != 1:
            raise ShapeError("backward() needs a scalar output")
        if not self.requires_grad:
            raise StateError("no recorded operations lead to this tensor")
        order, seen, stack = [], set(), [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # intermediate gradients are no longer needed
                    node.grad = None

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _acc(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _grad_buffer(t: Tensor) -> np.ndarray:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    return t.grad


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _make(data, parents, backward) -> Tensor:
    live = tuple(p for p in parents if p.requires_grad)
    if not live:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=live, _backward=backward)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.requires_grad:
            _acc(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), back)


def matmul(a, b) -> Tensor:
    """``a @ b`` where ``b`` is 2-D and ``a`` has any number of leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if b.data.ndim != 2 or a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"cannot matmul {a.data.shape} by {b.data.shape}")

    def back(g):
        if a.requires_grad:
            _acc(a, g @ b.data.T)
        if b.requires_grad:
            k, n = b.data.shape
            _acc(b, a.data.reshape(-1, k).T @ g.reshape(-1, n))

    return _make(a.data @ b.data, (a, b), back)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # tanh form avoids overflow in exp for large |x|
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def back(g):
        _acc(a, g * out * (1.0 - out))

    return _make(out, (a,), back)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)

    def back(g):
        _acc(a, g * (1.0 - out * out))

    return _make(out, (a,), back)


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)

    def back(g):
        if a.requires_grad:
            _grad_buffer(a)[idx] += g

    return _make(a.data[idx], (a,), back)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)

    def back(g):
        _acc(a, g.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), back)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _acc(t, g[tuple(sl)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def back(g):
        for k, t in enumerate(tensors):
            if t.requires_grad:
                _acc(t, np.take(g, k, axis=axis))

    return _make(np.stack([t.data for t in tensors], axis=axis), tensors, back)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather ``weight[ids]`` for an integer array of any shape."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.data.shape[0]):
        raise IndexError("embedding id out of range")

    def back(g):
        if weight.requires_grad:
            np.add.at(_grad_buffer(weight), ids.reshape(-1), g.reshape(-1, weight.data.shape[1]))

    return _make(weight.data[ids], (weight,), back)


def permute_time(x: Tensor, index: np.ndarray) -> Tensor:
    """Reorder axis 1 of ``x`` row by row: ``out[b, t] = x[b, index[b, t]]``.

    ``index`` must hold a permutation of ``range(T)`` in every row.
    """
    index = np.asarray(index)
    inverse = np.argsort(index, axis=1, kind="stable")
    expand = (slice(None), slice(None)) + (None,) * (x.data.ndim - 2)
    fwd, inv = index[expand], inverse[expand]

    def back(g):
        _acc(x, np.take_along_axis(g, inv, axis=1))

    return _make(np.take_along_axis(x.data, fwd, axis=1), (x,), back)


def span_max(x: Tensor, spans: Sequence[tuple[int, int, int]]) -> Tensor:
    """Max over ``x[b, start:end]`` for every ``(b, start, end)``; shape (N, H)."""
    data = x.data
    n_spans = len(spans)
    out = np.empty((n_spans, data.shape[-1]), dtype=data.dtype)
    src_b = np.empty((n_spans, data.shape[-1]), dtype=np.int64)
    src_t = np.empty((n_spans, data.shape[-1]), dtype=np.int64)
    for k, (b, s, e) in enumerate(spans):
        if e <= s:
            raise ShapeError(f"empty span {(b, s, e)}")
        block = data[b, s:e]
        arg = block.argmax(axis=0)
        out[k] = block[arg, np.arange(block.shape[1])]
        src_b[k] = b
        src_t[k] = s + arg

    def back(g):
        if x.requires_grad:
            cols = np.broadcast_to(np.arange(data.shape[-1]), g.shape)
            np.add.at(_grad_buffer(x), (src_b, src_t, cols), g)

    return _make(out, (x,), back)


def scatter_rows(x: Tensor, positions: np.ndarray, out_shape) -> Tensor:
    """Place row ``k`` of a (N, H) tensor at flat row ``positions[k]`` of a zero array."""
    positions = np.asarray(positions, dtype=np.int64)
    h = x.data.shape[-1]
    out = np.zeros(tuple(out_shape), dtype=x.data.dtype)
    out.reshape(-1, h)[positions] = x.data

    def back(g):
        _acc(x, g.reshape(-1, h)[positions])

    return _make(out, (x,), back)


def cross_entropy(logits: Tensor, targets: np.ndarray, weights: np.ndarray) -> Tensor:
    """``-sum_i weights[i] * log softmax(logits[i])[targets[i]]`` for 2-D logits."""
    z = logits.data
    if z.ndim != 2 or len(targets) != z.shape[0] or len(weights) != z.shape[0]:
        raise ShapeError(f"logits {z.shape} do not match {len(targets)} targets")
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=z.dtype)
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    rows = np.arange(z.shape[0])
    loss = -(weights * logp[rows, targets]).sum()

    def back(g):
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        _acc(logits, g * weights[:, None] * grad)

    return _make(np.asarray(loss, dtype=z.dtype), (logits,), back)
