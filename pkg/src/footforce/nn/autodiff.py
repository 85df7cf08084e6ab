"""A small reverse-mode automatic differentiation engine on numpy arrays.

Only the operations the models, losses and the IK energy need are provided.
Each op builds a new ``Tensor`` that remembers its parents and a closure
mapping the output gradient to parent gradients. ``Tensor.backward`` runs
the closures in reverse topological order.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import kernels


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _needs(parent):
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


def _needs(t):
    return t.requires_grad or t._backward is not None


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
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
            if id(p) not in seen and _needs(p):
                stack.append((p, False))
    return order


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data, parents, backward):
    if not any(_needs(p) for p in parents):
        return Tensor(data)
    return Tensor(data, parents=parents, backward=backward)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise ---------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a, None), as_tensor(b, None)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def square(a):
    return _make(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def total(a, axis=None):
    """Sum over ``axis`` (all axes by default)."""
    out = a.data.sum(axis=axis)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).astype(a.dtype),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).astype(a.dtype),)
    return _make(out, (a,), back)


def mean(a):
    n = a.data.size
    return _make(a.data.mean(), (a,),
                 lambda g: (np.full(a.shape, g / n, dtype=a.dtype),))


def reshape(a, shape):
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def concat(ts, axis=-1):
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(data, tuple(ts), lambda g: tuple(np.split(g, sizes, axis=axis)))


def diff2(a):
    """Second difference along axis 0: a[2:] - 2 a[1:-1] + a[:-2]."""
    x = a.data

    def back(g):
        out = np.zeros_like(x)
        out[2:] += g
        out[1:-1] -= 2.0 * g
        out[:-2] += g
        return (out,)
    return _make(x[2:] - 2.0 * x[1:-1] + x[:-2], (a,), back)


# -- activations ---------------------------------------------------------------

def elu(a):
    x = a.data
    neg = np.expm1(np.minimum(x, 0.0))
    out = np.where(x > 0, x, neg)
    return _make(out, (a,), lambda g: (g * np.where(x > 0, 1.0, neg + 1.0).astype(x.dtype),))


def relu(a):
    x = a.data
    return _make(np.maximum(x, 0), (a,), lambda g: (g * (x > 0),))


def _softplus(x):
    return np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)


def softplus(a):
    x = a.data
    return _make(_softplus(x), (a,), lambda g: (g * _sigmoid(x),))


def sigmoid(a):
    s = _sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def dropout(a, p, rng):
    """Inverted dropout; identity when ``rng`` is None or p == 0."""
    if rng is None or p == 0:
        return a
    keep = (rng.random(a.shape) >= p).astype(a.dtype) / a.dtype.type(1.0 - p)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


# -- layers --------------------------------------------------------------------

def dense(x, w, b):
    """x (..., Cin) @ w (Cin, Cout) + b (Cout,)."""
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, x.shape[-1])
    out = (x2 @ w.data + b.data).reshape(lead + (w.shape[1],))

    def back(g):
        g2 = g.reshape(-1, w.shape[1])
        return ((g2 @ w.data.T).reshape(x.shape), x2.T @ g2, g2.sum(axis=0))
    return _make(out, (x, w, b), back)


def conv1d(x, w, b):
    """Temporal convolution with replicate padding; length preserving.

    x (B, T, Cin), w (K, Cin, Cout) with odd K, b (Cout,). Output (B, T, Cout).
    """
    B, T, C = x.shape
    K, _, Co = w.shape
    pad = K // 2
    xp = np.concatenate([np.repeat(x.data[:, :1], pad, axis=1), x.data,
                         np.repeat(x.data[:, -1:], pad, axis=1)], axis=1)
    win = sliding_window_view(xp, K, axis=1)  # (B, T, C, K)
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(B * T, K * C)
    w2 = w.data.reshape(K * C, Co)
    out = (cols @ w2 + b.data).reshape(B, T, Co)

    def back(g):
        g2 = g.reshape(B * T, Co)
        gw = (cols.T @ g2).reshape(w.shape)
        gb = g2.sum(axis=0)
        gcols = (g2 @ w2.T).reshape(B, T, K, C)
        gxp = np.zeros_like(xp)
        for k in range(K):
            gxp[:, k:k + T] += gcols[:, :, k]
        gx = gxp[:, pad:pad + T].copy()
        if pad:
            gx[:, 0] += gxp[:, :pad].sum(axis=1)
            gx[:, -1] += gxp[:, pad + T:].sum(axis=1)
        return (gx, gw, gb)
    return _make(out, (x, w, b), back)


# -- losses --------------------------------------------------------------------

def msle(pred, target):
    """mean((ln(target + 1) - ln(pred + 1))^2); both inputs must be >= 0."""
    pred, target = as_tensor(pred), as_tensor(target)
    if np.any(pred.data < 0) or np.any(target.data < 0):
        raise ValueError("msle: negative input")
    # ln((t + 1) / (p + 1)) as log1p of a difference: no cancellation when p ~ t
    d = np.log1p((target.data - pred.data) / (1.0 + pred.data))
    n = d.size
    out = np.mean(d * d)

    def back(g):
        k = 2.0 * g / n
        return (-k * d / (1.0 + pred.data), k * d / (1.0 + target.data))
    return _make(np.asarray(out, dtype=pred.dtype), (pred, target), back)


def bce_logits(z, c):
    """mean(log(1 + exp(-s z))) with s = 2c - 1, in the overflow-free form."""
    z = as_tensor(z)
    c = np.asarray(c.data if isinstance(c, Tensor) else c)
    if c.shape != z.shape:
        raise ValueError(f"bce: shape mismatch {z.shape} vs {c.shape}")
    s = (2.0 * c - 1.0).astype(z.dtype)
    m = -s * z.data
    n = m.size
    out = np.mean(_softplus(m))
    return _make(np.asarray(out, dtype=z.dtype), (z,),
                 lambda g: (-s * _sigmoid(m) * (g / n),))


# -- kinematics ------------------------------------------------------------------

def forward_kinematics(parents, offsets, root, quats):
    """Joint positions (T, J, 3) from root translation (T, 3) and local quaternions (T, J, 4).

    Quaternions need not be unit length: a joint rotates its children by
    q v q*, which also scales them by |q|^2.
    """
    parents = np.asarray(parents, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.float64)
    pos, glob = kernels.fk_forward(parents, offsets, root.data, quats.data)

    def back(g):
        groot, gq = kernels.fk_backward(parents, offsets, quats.data, glob, g)
        return (groot.astype(root.dtype), gq.astype(quats.dtype))
    return _make(pos.astype(quats.dtype), (root, quats), back)


def geodesic_sq(q, q_ref):
    """Squared rotation angle between ``q`` (normalized inside) and unit ``q_ref``.

    Returns the per-element angles^2 (shape q.shape[:-1]). Sign-agnostic.
    """
    x = q.data
    r = np.asarray(q_ref.data if isinstance(q_ref, Tensor) else q_ref, dtype=x.dtype)
    nq = np.linalg.norm(x, axis=-1)
    dot = np.sum(x * r, axis=-1)
    sgn = np.where(dot < 0, -1.0, 1.0)
    # atan2 of the perpendicular and parallel parts is exact near zero angle,
    # where arccos of the dot product loses half of the digits
    perp = np.linalg.norm(x - dot[..., None] * r, axis=-1)
    half = np.arctan2(perp, sgn * dot)
    out = 4.0 * half * half

    def back(g):
        sin_h = np.sin(half)
        # d(4 h^2)/d cos(h), with its finite limit at h = 0
        dfd = np.where(half < 1e-4, -8.0 * (1.0 + half * half / 6.0),
                       -8.0 * half / np.maximum(sin_h, 1e-300))
        # cos(h) = s <x, r> / |x|
        ddx = sgn[..., None] * (r / nq[..., None] - (dot / nq ** 3)[..., None] * x)
        return ((g * dfd)[..., None] * ddx,)
    return _make(out, (q,), back)
