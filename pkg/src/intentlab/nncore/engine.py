"""Reverse-mode automatic differentiation over numpy arrays.

``Value`` wraps an array and remembers the operation that produced it. Calling
:func:`backward` on a scalar walks the graph in reverse topological order and
accumulates ``grad`` into every leaf.
"""
from __future__ import annotations

import numpy as np

from ..errors import NonFiniteLoss, ShapeMismatch

PROB_FLOOR = 1e-12


class Value:
    __slots__ = ("value", "grad", "parents", "_backward", "name")

    def __init__(self, value, parents=(), backward=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def is_leaf(self):
        return not self.parents

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Value{label}(shape={self.shape})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_value(other)))

    def __rsub__(self, other):
        return add(as_value(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_value(other)
        return mul(self, power(other, -1.0))

    def __rtruediv__(self, other):
        return mul(as_value(other), power(self, -1.0))

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, float(exponent))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return vmean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(node, g):
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64, copy=True).reshape(node.shape)
    else:
        node.grad = node.grad + g


# elementary operations ------------------------------------------------------

def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = Value(a.value + b.value, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    out._backward = bw
    return out


def neg(a) -> Value:
    out = Value(-a.value, (a,))
    out._backward = lambda g: _accumulate(a, -g)
    return out


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = Value(a.value * b.value, (a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g * b.value, a.shape))
        _accumulate(b, _unbroadcast(g * a.value, b.shape))

    out._backward = bw
    return out


def power(a, exponent: float) -> Value:
    out = Value(a.value ** exponent, (a,))
    out._backward = lambda g: _accumulate(a, g * exponent * a.value ** (exponent - 1.0))
    return out


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    out = Value(a.value @ b.value, (a, b))

    def bw(g):
        _accumulate(a, g @ b.value.T)
        _accumulate(b, a.value.T @ g)

    out._backward = bw
    return out


def tanh(a) -> Value:
    y = np.tanh(a.value)
    out = Value(y, (a,))
    out._backward = lambda g: _accumulate(a, g * (1.0 - y * y))
    return out


def exp(a) -> Value:
    y = np.exp(a.value)
    out = Value(y, (a,))
    out._backward = lambda g: _accumulate(a, g * y)
    return out


def log(a) -> Value:
    out = Value(np.log(a.value), (a,))
    out._backward = lambda g: _accumulate(a, g / a.value)
    return out


def sqrt(a) -> Value:
    y = np.sqrt(a.value)
    out = Value(y, (a,))
    out._backward = lambda g: _accumulate(a, g * 0.5 / y)
    return out


def vsum(a, axis=None, keepdims=False) -> Value:
    out = Value(a.value.sum(axis=axis, keepdims=keepdims), (a,))

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape))

    out._backward = bw
    return out


def vmean(a, axis=None, keepdims=False) -> Value:
    count = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return vsum(a, axis, keepdims) * (1.0 / count)


def transpose(a) -> Value:
    out = Value(a.value.T, (a,))
    out._backward = lambda g: _accumulate(a, g.T)
    return out


def reshape(a, shape) -> Value:
    out = Value(a.value.reshape(shape), (a,))
    out._backward = lambda g: _accumulate(a, g.reshape(a.shape))
    return out


def take(a, idx) -> Value:
    out = Value(a.value[idx], (a,))

    def bw(g):
        full = np.zeros_like(a.value)
        np.add.at(full, idx, g)
        _accumulate(a, full)

    out._backward = bw
    return out


def concat(values, axis=0) -> Value:
    values = [as_value(v) for v in values]
    out = Value(np.concatenate([v.value for v in values], axis=axis), tuple(values))
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def bw(g):
        for v, piece in zip(values, np.split(g, bounds, axis=axis)):
            _accumulate(v, piece)

    out._backward = bw
    return out


# fused numerically careful operations -------------------------------------

def logsumexp(a, axis=-1) -> Value:
    """Max-shifted log-sum-exp along ``axis`` (the axis is removed)."""
    x = a.value
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out = Value(np.squeeze(m + np.log(s), axis=axis), (a,))
    soft = e / s

    def bw(g):
        _accumulate(a, np.expand_dims(g, axis) * soft)

    out._backward = bw
    return out


def l2_normalize(a, axis=-1) -> Value:
    norm = np.sqrt((a.value * a.value).sum(axis=axis, keepdims=True))
    if np.any(norm == 0):
        from ..errors import ZeroVector
        raise ZeroVector("cannot normalize a zero vector")
    u = a.value / norm
    out = Value(u, (a,))

    def bw(g):
        _accumulate(a, (g - u * (g * u).sum(axis=axis, keepdims=True)) / norm)

    out._backward = bw
    return out


def log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def sigmoid(z):
    return np.exp(log_sigmoid(z))


def binary_cross_entropy_with_logits(logits, targets) -> Value:
    """Mean BCE of ``sigmoid(logits)`` against 0/1 targets.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]``; entries that hit the
    clamp contribute no gradient.
    """
    z = logits.value
    y = np.asarray(targets, dtype=np.float64).reshape(z.shape)
    p = sigmoid(z)
    lo, hi = np.log(PROB_FLOOR), np.log1p(-PROB_FLOOR)
    lp = np.clip(log_sigmoid(z), lo, hi)
    lq = np.clip(log_sigmoid(-z), lo, hi)
    out = Value(-(y * lp + (1.0 - y) * lq).mean(), (logits,))
    active_p = (log_sigmoid(z) > lo) & (log_sigmoid(z) < hi)
    active_q = (log_sigmoid(-z) > lo) & (log_sigmoid(-z) < hi)

    def bw(g):
        # d/dz of -log p is -(1-p); of -log(1-p) is p
        dz = -y * (1.0 - p) * active_p + (1.0 - y) * p * active_q
        _accumulate(logits, g * dz / z.size)

    out._backward = bw
    return out


def cross_entropy(logits, labels) -> Value:
    """Mean softmax cross-entropy over rows with the target probability clamped."""
    x = logits.value
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise ShapeMismatch(f"logits {x.shape} do not match labels {labels.shape}")
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    rows = np.arange(x.shape[0])
    logp = x[rows, labels] - lse
    lo, hi = np.log(PROB_FLOOR), np.log1p(-PROB_FLOOR)
    clamped = np.clip(logp, lo, hi)
    active = (logp > lo) & (logp < hi)
    out = Value(-clamped.mean(), (logits,))
    soft = np.exp(x - lse[:, None])

    def bw(g):
        d = soft.copy()
        d[rows, labels] -= 1.0
        d *= active[:, None]
        _accumulate(logits, g * d / x.shape[0])

    out._backward = bw
    return out


# graph traversal ------------------------------------------------------------

def _topological(root):
    order, seen, stack = [], set(), [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Value) -> list[Value]:
    """Accumulate d(loss)/d(leaf) into the ``grad`` of every reachable leaf.

    Returns the reachable leaves. Leaf gradients accumulate across calls, so
    zero them between independent evaluations.
    """
    if loss.value.size != 1:
        raise ShapeMismatch(f"backward needs a scalar loss, got shape {loss.shape}")
    if not np.isfinite(loss.value).all():
        raise NonFiniteLoss(f"loss is not finite: {float(loss.value)}")
    order = _topological(loss)
    leaves = []
    for node in order:
        if node.is_leaf:
            leaves.append(node)
            if node.grad is None:
                node.zero_grad()
        else:
            node.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    return leaves
