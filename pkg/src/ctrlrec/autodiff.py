"""Minimal reverse-mode automatic differentiation over numpy arrays.

Tape-free design: every operation returns a Tensor that closes over its
parents and a backward function. Calling ``backward(root, seed)`` walks the
graph in reverse topological order and accumulates gradients into ``.grad``.
Only paths that require gradients are recorded, so inference-mode forwards
build no graph at all. All arithmetic is float64.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, data, parents=(), backward_fn=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def ensure_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def leaf(data):
    """A learnable leaf tensor (gradient target)."""
    return Tensor(data, requires_grad=True)


def constant(data):
    return data if isinstance(data, Tensor) else Tensor(data)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` to undo numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _binary(a, b):
    a = constant(a)
    b = constant(b)
    return a, b


def add(a, b):
    a, b = _binary(a, b)
    out_data = a.data + b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += _unbroadcast(g, a.data.shape)
        if b.requires_grad:
            b.ensure_grad()
            b.grad += _unbroadcast(g, b.data.shape)

    return Tensor(out_data, (a, b), backward)


def sub(a, b):
    a, b = _binary(a, b)
    out_data = a.data - b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += _unbroadcast(g, a.data.shape)
        if b.requires_grad:
            b.ensure_grad()
            b.grad -= _unbroadcast(g, b.data.shape)

    return Tensor(out_data, (a, b), backward)


def mul(a, b):
    a, b = _binary(a, b)
    out_data = a.data * b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            a.grad += _unbroadcast(g * b.data, a.data.shape)
        if b.requires_grad:
            b.ensure_grad()
            b.grad += _unbroadcast(g * a.data, b.data.shape)

    return Tensor(out_data, (a, b), backward)


def matmul(a, b):
    """Matrix product with numpy's stacked-batch broadcasting."""
    a, b = _binary(a, b)
    out_data = a.data @ b.data
    if not (a.requires_grad or b.requires_grad):
        return Tensor(out_data)

    def backward(g):
        if a.requires_grad:
            a.ensure_grad()
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.grad += _unbroadcast(ga, a.data.shape)
        if b.requires_grad:
            b.ensure_grad()
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.grad += _unbroadcast(gb, b.data.shape)

    return Tensor(out_data, (a, b), backward)


def transpose_last(a):
    a = constant(a)
    out_data = np.swapaxes(a.data, -1, -2)
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad += np.swapaxes(g, -1, -2)

    return Tensor(out_data, (a,), backward)


def tsum(a, axis=None, keepdims=False):
    a = constant(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        if axis is None:
            a.grad += g
        elif keepdims:
            a.grad += np.broadcast_to(g, a.data.shape)
        else:
            a.grad += np.broadcast_to(np.expand_dims(g, axis), a.data.shape)

    return Tensor(out_data, (a,), backward)


def tmean(a, axis=None, keepdims=False):
    a = constant(a)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def relu(a):
    a = constant(a)
    out_data = np.maximum(a.data, 0.0)
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad += g * (a.data > 0.0)

    return Tensor(out_data, (a,), backward)


def sigmoid(a):
    a = constant(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad += g * out_data * (1.0 - out_data)

    return Tensor(out_data, (a,), backward)


def tanh(a):
    a = constant(a)
    out_data = np.tanh(a.data)
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad += g * (1.0 - out_data * out_data)

    return Tensor(out_data, (a,), backward)


def softplus(a):
    """log(1 + exp(x)), computed stably; gradient is sigmoid(x)."""
    a = constant(a)
    out_data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad += g / (1.0 + np.exp(-a.data))

    return Tensor(out_data, (a,), backward)


def softmax_last(a):
    """Softmax over the last axis (shift-stabilized)."""
    a = constant(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        a.grad += out_data * (g - dot)

    return Tensor(out_data, (a,), backward)


def layer_norm(x, gain, bias, eps=1e-8):
    """Layer normalization over the last axis with learnable gain/bias."""
    x, gain = _binary(x, gain)
    bias = constant(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data
    if not (x.requires_grad or gain.requires_grad or bias.requires_grad):
        return Tensor(out_data)

    d = x.data.shape[-1]

    def backward(g):
        if gain.requires_grad:
            gain.ensure_grad()
            gain.grad += _unbroadcast(g * xhat, gain.data.shape)
        if bias.requires_grad:
            bias.ensure_grad()
            bias.grad += _unbroadcast(g, bias.data.shape)
        if x.requires_grad:
            x.ensure_grad()
            gx = g * gain.data
            x.grad += inv * (
                gx
                - gx.mean(axis=-1, keepdims=True)
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            )

    return Tensor(out_data, (x, gain, bias), backward)


def gather_rows(table, idx):
    """table[idx] for an integer index array; scatter-add on the way back."""
    table = constant(table)
    idx = np.asarray(idx)
    out_data = table.data[idx]
    if not table.requires_grad:
        return Tensor(out_data)

    def backward(g):
        table.ensure_grad()
        np.add.at(table.grad, idx, g)

    return Tensor(out_data, (table,), backward)


def select_step(x, t):
    """x[:, t, :] as a graph op (time-step slice of a (B, T, C) tensor)."""
    x = constant(x)
    out_data = x.data[:, t]
    if not x.requires_grad:
        return Tensor(out_data)

    def backward(g):
        x.ensure_grad()
        x.grad[:, t] += g

    return Tensor(out_data, (x,), backward)


def select_positions(x, pos):
    """x[arange(B), pos] — one row per batch element of a (B, T, C) tensor."""
    x = constant(x)
    pos = np.asarray(pos)
    rows = np.arange(x.data.shape[0])
    out_data = x.data[rows, pos]
    if not x.requires_grad:
        return Tensor(out_data)

    def backward(g):
        x.ensure_grad()
        np.add.at(x.grad, (rows, pos), g)

    return Tensor(out_data, (x,), backward)


def stack_steps(steps):
    """Stack a list of (B, C) tensors into (B, T, C)."""
    steps = [constant(s) for s in steps]
    out_data = np.stack([s.data for s in steps], axis=1)
    if not any(s.requires_grad for s in steps):
        return Tensor(out_data)

    def backward(g):
        for t, s in enumerate(steps):
            if s.requires_grad:
                s.ensure_grad()
                s.grad += g[:, t]

    return Tensor(out_data, tuple(steps), backward)


def reshape(a, shape):
    a = constant(a)
    out_data = a.data.reshape(shape)
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad += g.reshape(a.data.shape)

    return Tensor(out_data, (a,), backward)


def expand_last(a):
    """Append a trailing singleton axis: (..., n) -> (..., n, 1)."""
    return reshape(a, a.data.shape + (1,))


def slice_last(a, lo, hi):
    """Contiguous slice [lo:hi] along the last axis."""
    a = constant(a)
    out_data = a.data[..., lo:hi]
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad[..., lo:hi] += g

    return Tensor(out_data, (a,), backward)


def cumsum_time(a):
    """Cumulative sum along axis 1 of a (B, T, C) tensor."""
    a = constant(a)
    out_data = np.cumsum(a.data, axis=1)
    if not a.requires_grad:
        return Tensor(out_data)

    def backward(g):
        a.ensure_grad()
        a.grad += np.flip(np.cumsum(np.flip(g, axis=1), axis=1), axis=1)

    return Tensor(out_data, (a,), backward)


def dropout(a, rate, rng):
    """Inverted dropout; only call in training mode."""
    a = constant(a)
    if rate <= 0.0:
        return a
    keep = rng.random(a.data.shape) >= rate
    scale = keep / (1.0 - rate)
    return mul(a, Tensor(scale))


def _toposort(root):
    order = []
    seen = set()
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
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(root, seed=None, zero=True):
    """Accumulate d(root)/d(leaf) into every reachable leaf's ``.grad``.

    ``seed`` is the upstream gradient (defaults to ones). With ``zero=True``
    all reachable grads are cleared first, so the same retained graph can be
    re-differentiated with different seeds.
    """
    if not root.requires_grad:
        raise ValueError("backward() on a graph with no gradient targets")
    order = _toposort(root)
    if zero:
        for node in order:
            node.grad = None
    root.ensure_grad()
    if seed is None:
        root.grad += np.ones_like(root.data)
    else:
        root.grad += np.asarray(seed, dtype=np.float64)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


class Adam:
    """Adaptive-moment optimizer over leaf tensors (in-place updates)."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            mhat = m / (1.0 - b1**self.t)
            vhat = v / (1.0 - b2**self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
