"""Minimal reverse-mode autodiff over numpy arrays.

Only the operations the architecture needs: embedding lookup, dense layers,
width-3 same-padded 1D convolution, segment/max pooling, softmax cross
entropy, dropout, and concatenation. Training runs in float32; gradient
checking uses float64 graphs built from float64 leaves.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A node in the computation graph: a value plus a backward closure."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=()):
        self.data = np.asarray(data)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        other = as_tensor(other, self.data.dtype)
        out = Tensor(self.data + other.data, (self, other))

        def bw(g):
            self._accum(_unbroadcast(g, self.data.shape))
            other._accum(_unbroadcast(g, other.data.shape))

        out._backward = bw
        return out

    def __mul__(self, other):
        other = as_tensor(other, self.data.dtype)
        out = Tensor(self.data * other.data, (self, other))

        def bw(g):
            self._accum(_unbroadcast(g * other.data, self.data.shape))
            other._accum(_unbroadcast(g * self.data, other.data.shape))

        out._backward = bw
        return out

    __radd__ = __add__
    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (as_tensor(other, self.data.dtype) * -1.0)

    def sum(self):
        out = Tensor(self.data.sum(), (self,))
        out._backward = lambda g: self._accum(np.full_like(self.data, g))
        return out

    def mean(self):
        n = self.data.size
        out = Tensor(self.data.mean(), (self,))
        out._backward = lambda g: self._accum(np.full_like(self.data, g / n))
        return out


def as_tensor(x, dtype=np.float32):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def constant(x, dtype=np.float32):
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(g, shape):
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g):
        a._accum(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
        b._accum(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))

    out._backward = bw
    return out


def take(x: Tensor, idx) -> Tensor:
    """Select rows along axis 0; idx may repeat."""
    idx = np.asarray(idx)
    out = Tensor(x.data[idx], (x,))

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        x._accum(gx)

    out._backward = bw
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y, (x,))
    out._backward = lambda g: x._accum(g * (1.0 - y * y))
    return out


def concat(tensors, axis=-1):
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accum(piece)

    out._backward = bw
    return out


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup; ids is an int array of any shape."""
    ids = np.asarray(ids)
    out = Tensor(table.data[ids], (table,))

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        table._accum(gt)

    out._backward = bw
    return out


def dense(x: Tensor, w: Tensor, b: Tensor, activation: bool = False) -> Tensor:
    """Affine map x @ w + b over the last axis, optional tanh."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise ValueError(
            f"dense: input dim {x.data.shape[-1]} != weight rows {w.data.shape[0]}"
        )
    vector_in = x.data.ndim == 1
    if vector_in:
        x = reshape(x, (1, -1))
    out = matmul(x, w) + b
    if vector_in:
        out = reshape(out, (-1,))
    return tanh(out) if activation else out


def _im2col(x, width=3):
    """x: (..., n, c) -> (..., n, width*c) with zero padding of width//2."""
    pad = width // 2
    shape = list(x.shape)
    n = shape[-2]
    padded = np.zeros(shape[:-2] + [n + 2 * pad, shape[-1]], dtype=x.dtype)
    padded[..., pad:pad + n, :] = x
    cols = [padded[..., i:i + n, :] for i in range(width)]
    return np.concatenate(cols, axis=-1)


def conv1d_same(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Width-3, stride-1, zero-padded cross-correlation.

    x: (..., n, c_in); w: (3*c_in, c_out); b: (c_out,).
    """
    width = 3
    c_in = x.data.shape[-1]
    if w.data.shape[0] != width * c_in:
        raise ValueError(
            f"conv1d_same: weight rows {w.data.shape[0]} != {width}*{c_in}"
        )
    col = _im2col(x.data, width)
    out = Tensor(col @ w.data + b.data, (x, w, b))

    def bw(g):
        b._accum(g.reshape(-1, g.shape[-1]).sum(axis=0))
        w._accum(col.reshape(-1, col.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
        gcol = g @ w.data.T
        pad = width // 2
        n = x.data.shape[-2]
        gpad = np.zeros(x.data.shape[:-2] + (n + 2 * pad, c_in), dtype=g.dtype)
        for i in range(width):
            gpad[..., i:i + n, :] += gcol[..., i * c_in:(i + 1) * c_in]
        x._accum(gpad[..., pad:pad + n, :])

    out._backward = bw
    return out


def _argmax_rows(values, axis):
    """Lowest-index argmax along `axis` (numpy argmax already breaks ties low)."""
    return np.argmax(values, axis=axis)


def max_over_time(x: Tensor) -> Tensor:
    """Per-column max over rows of an (n, c) tensor; ties route to lowest row."""
    if x.data.ndim != 2 or x.data.shape[0] == 0:
        raise ValueError("max_over_time requires a non-empty (n, c) tensor")
    idx = _argmax_rows(x.data, axis=0)
    cols = np.arange(x.data.shape[1])
    out = Tensor(x.data[idx, cols], (x,))

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[idx, cols] = g
        x._accum(gx)

    out._backward = bw
    return out


def masked_max(x: Tensor, mask) -> Tensor:
    """Max over axis -2 restricted to rows where mask is True.

    x: (..., n, c); mask: (..., n) boolean. Rows with an all-false mask
    yield zeros and receive no gradient.
    """
    mask = np.asarray(mask, dtype=bool)
    neg = np.where(mask[..., None], x.data, -np.inf)
    idx = _argmax_rows(neg, axis=-2)
    raw = np.take_along_axis(x.data, idx[..., None, :], axis=-2).squeeze(-2)
    any_row = mask.any(axis=-1)
    vals = np.where(any_row[..., None], raw, 0.0).astype(x.data.dtype)
    out = Tensor(vals, (x,))

    def bw(g):
        gx = np.zeros_like(x.data)
        gsel = np.where(any_row[..., None], g, 0.0)
        np.put_along_axis(gx, idx[..., None, :], gsel[..., None, :], axis=-2)
        # put_along_axis overwrites; rebuild additively for safety on ties
        x._accum(gx)

    out._backward = bw
    return out


def segment_max(h: Tensor, split_a: int, split_b: int) -> Tensor:
    """Dynamic multi-pooling over three row segments of an (n, d) tensor.

    split_a/split_b are 1-based segment end positions: segments are rows
    [1..split_a], [split_a+1..split_b], [split_b+1..n]. An empty segment
    contributes a zero vector. Returns a 3d vector.
    """
    n, d = h.data.shape
    if not (1 <= split_a < split_b <= n):
        raise ValueError(f"segment_max: need 1 <= {split_a} < {split_b} <= {n}")
    bounds = [(0, split_a), (split_a, split_b), (split_b, n)]
    pieces = []
    grads = []  # (row_offset, argmax rows) per non-empty segment, None if empty
    for lo, hi in bounds:
        if hi > lo:
            seg = h.data[lo:hi]
            idx = _argmax_rows(seg, axis=0)
            pieces.append(seg[idx, np.arange(d)])
            grads.append((lo, idx))
        else:
            pieces.append(np.zeros(d, dtype=h.data.dtype))
            grads.append(None)
    out = Tensor(np.concatenate(pieces), (h,))

    def bw(g):
        gh = np.zeros_like(h.data)
        for si, info in enumerate(grads):
            if info is None:
                continue
            lo, idx = info
            gh[lo + idx, np.arange(d)] += g[si * d:(si + 1) * d]
        h._accum(gh)

    out._backward = bw
    return out


def softmax(p):
    """Stable softmax over the last axis of a plain array."""
    p = np.asarray(p)
    shifted = p - p.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_tensor(x: Tensor) -> Tensor:
    y = softmax(x.data)
    out = Tensor(y, (x,))

    def bw(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        x._accum(y * (g - dot))

    out._backward = bw
    return out


PROB_FLOOR = 1e-12


def cross_entropy(probs, gold: int) -> float:
    """-log probs[gold] with a probability floor; plain-array helper."""
    probs = np.asarray(probs)
    if not 0 <= gold < probs.shape[-1]:
        raise ValueError(f"cross_entropy: gold index {gold} out of range")
    return float(-np.log(max(float(probs[gold]), PROB_FLOOR)))


def softmax_cross_entropy(logits: Tensor, gold) -> tuple[Tensor, np.ndarray]:
    """Fused softmax + mean cross entropy over rows.

    logits: (N, C); gold: (N,) int array. Returns (scalar loss tensor,
    probability array of shape (N, C)).
    """
    gold = np.asarray(gold)
    probs = softmax(logits.data)
    n = logits.data.shape[0]
    rows = np.arange(n)
    picked = np.maximum(probs[rows, gold], PROB_FLOOR)
    loss_val = -np.log(picked).mean()
    out = Tensor(np.asarray(loss_val, dtype=logits.data.dtype), (logits,))

    def bw(g):
        gl = probs.copy()
        gl[rows, gold] -= 1.0
        logits._accum(g * gl / n)

    out._backward = bw
    return out, probs


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape), (x,))
    out._backward = lambda g: x._accum(g.reshape(x.data.shape))
    return out


def stack_rows(tensors) -> Tensor:
    """Stack 1-D tensors of equal length into an (N, d) tensor."""
    return concat([reshape(t, (1, -1)) for t in tensors], axis=0)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when rng is None (inference/gradcheck)."""
    if rng is None or rate <= 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) < keep).astype(x.data.dtype) / keep
    out = Tensor(x.data * mask, (x,))
    out._backward = lambda g: x._accum(g * mask)
    return out
