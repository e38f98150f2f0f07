"""Dense float64 tensors with tape-based reverse-mode autodiff.

A `Tensor` wraps a numpy float64 array. Every op records its parents and a
closure computing parent gradients, so `backward()` on a scalar walks the
graph in reverse topological order and accumulates gradients over all paths.
The graph is dynamic: it is rebuilt on every forward pass and released after
backward. All math stays in 64-bit floats so gradients can be checked against
central finite differences.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GraphReleasedError(RuntimeError):
    """backward() was called on a graph that has already been released."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn", "_released")

    # make numpy defer to the reflected operators below instead of
    # elementwise-broadcasting over this object
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._grad_fn = None
        self._released = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def backward(self):
        """Reverse-mode accumulation from this scalar; frees the graph after."""
        if self._released:
            raise GraphReleasedError("backward() on a released graph")
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.data.shape}")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._grad_fn is None:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._grad_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue  # constant subtree
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

        for node in topo:
            if node._grad_fn is not None:
                node._grad_fn = None
                node._parents = ()
                node._released = True


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data, parents, grad_fn):
    if not any(p.requires_grad for p in parents):
        return Tensor(data)
    out = Tensor(data)
    out.requires_grad = True
    out._parents = tuple(parents)
    out._grad_fn = grad_fn
    return out


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to `shape`."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# debug hook for negative-control tests: scales matmul's input gradient
_FAULT_SCALE = 1.0


@contextmanager
def gradient_fault(scale):
    """Deliberately corrupt matmul's left-operand gradient by `scale`."""
    global _FAULT_SCALE
    _FAULT_SCALE = float(scale)
    try:
        yield
    finally:
        _FAULT_SCALE = 1.0


# ---------------------------------------------------------------------------
# elementwise ops

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} do not broadcast") from None
    out = a.data + b.data

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), grad_fn)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"mul: shapes {a.data.shape} and {b.data.shape} do not broadcast") from None
    out = a.data * b.data

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _make(out, (a, b), grad_fn)


def neg(a):
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def relu(a):
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)
    live = a.data > 0.0  # subgradient at 0 is 0

    def grad_fn(g):
        return (g * live,)

    return _make(out, (a,), grad_fn)


def _sigmoid_stable(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = _as_tensor(a)
    s = _sigmoid_stable(a.data)

    def grad_fn(g):
        return (g * s * (1.0 - s),)

    return _make(s, (a,), grad_fn)


def tanh(a):
    a = _as_tensor(a)
    th = np.tanh(a.data)

    def grad_fn(g):
        return (g * (1.0 - th * th),)

    return _make(th, (a,), grad_fn)


# ---------------------------------------------------------------------------
# matrix / structural ops

def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs matrix operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.data.shape} x {b.data.shape}")
    out = a.data @ b.data

    def grad_fn(g):
        ga = (g @ np.swapaxes(b.data, -1, -2)) * _FAULT_SCALE
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _reduce_matmul(ga, a.data.shape), _reduce_matmul(gb, b.data.shape)

    return _make(out, (a, b), grad_fn)


def _reduce_matmul(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i in range(len(shape) - 2) if shape[i] == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def concat_lastdim(tensors):
    tensors = [_as_tensor(x) for x in tensors]
    widths = [x.data.shape[-1] for x in tensors]
    out = np.concatenate([x.data for x in tensors], axis=-1)
    offsets = np.cumsum([0] + widths)

    def grad_fn(g):
        return tuple(g[..., offsets[i]:offsets[i + 1]] for i in range(len(tensors)))

    return _make(out, tuple(tensors), grad_fn)


def slice_lastdim(a, start, stop):
    a = _as_tensor(a)
    out = a.data[..., start:stop]

    def grad_fn(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        return (full,)

    return _make(out, (a,), grad_fn)


def stack_newdim(tensors, axis=0):
    tensors = [_as_tensor(x) for x in tensors]
    out = np.stack([x.data for x in tensors], axis=axis)

    def grad_fn(g):
        moved = np.moveaxis(g, axis, 0)
        return tuple(moved[i] for i in range(len(tensors)))

    return _make(out, tuple(tensors), grad_fn)


def reshape(a, shape):
    a = _as_tensor(a)
    out = a.data.reshape(shape)

    def grad_fn(g):
        return (g.reshape(a.data.shape),)

    return _make(out, (a,), grad_fn)


def transpose_last2(a):
    a = _as_tensor(a)
    out = np.swapaxes(a.data, -1, -2)

    def grad_fn(g):
        return (np.swapaxes(g, -1, -2),)

    return _make(out, (a,), grad_fn)


def take_step(a, t):
    """Select timestep `t` from a (batch, time, features) tensor."""
    a = _as_tensor(a)
    if a.data.ndim != 3:
        raise ShapeError(f"take_step expects a rank-3 input, got {a.data.shape}")
    out = a.data[:, t, :]

    def grad_fn(g):
        full = np.zeros_like(a.data)
        full[:, t, :] = g
        return (full,)

    return _make(out, (a,), grad_fn)


# ---------------------------------------------------------------------------
# normalization / attention pieces

def masked_softmax(x, mask=None):
    """Softmax over the last axis; masked positions come out exactly 0.

    `mask` is boolean with True marking live positions; its shape must agree
    with the last axis of `x` and broadcast over the rest.
    """
    x = _as_tensor(x)
    if mask is None:
        xmax = x.data.max(axis=-1, keepdims=True)
        e = np.exp(x.data - xmax)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape[-1] != x.data.shape[-1]:
            raise ShapeError(
                f"mask last dimension {mask.shape} does not match input {x.data.shape}")
        bmask = np.broadcast_to(mask, x.data.shape)
        if not bmask.any(axis=-1).all():
            raise ValueError("masked_softmax: a row has every position masked")
        xmax = np.where(bmask, x.data, -np.inf).max(axis=-1, keepdims=True)
        e = np.exp(np.where(bmask, x.data - xmax, 0.0)) * bmask
    p = e / e.sum(axis=-1, keepdims=True)

    def grad_fn(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        return (p * (g - inner),)

    return _make(p, (x,), grad_fn)


def layer_norm(x, gain, bias, eps=1e-5):
    """Mean-0 / variance-1 over the last axis, then scale and shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeError(
            f"layer_norm gain/bias {gain.data.shape}/{bias.data.shape} must be ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def grad_fn(g):
        gg = _unbroadcast(g * xhat, gain.data.shape)
        gb = _unbroadcast(g, bias.data.shape)
        gh = g * gain.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, gg, gb

    return _make(out, (x, gain, bias), grad_fn)


def conv1d(x, kernels):
    """Same-length 1D cross-correlation over the last axis.

    x: (..., C_in, L); kernels: (C_out, C_in, k). Zero padding is symmetric,
    biased one to the left for even k, so the output length is always L.
    """
    x, kernels = _as_tensor(x), _as_tensor(kernels)
    if kernels.data.ndim != 3:
        raise ShapeError(f"conv1d kernels must be (C_out, C_in, k), got {kernels.data.shape}")
    if x.data.ndim < 2:
        raise ShapeError(f"conv1d input must be at least (C_in, L), got {x.data.shape}")
    c_out, c_in, k = kernels.data.shape
    if x.data.shape[-2] != c_in:
        raise ShapeError(
            f"conv1d channel mismatch: input {x.data.shape} vs kernels {kernels.data.shape}")
    L = x.data.shape[-1]
    pad_l = (k - 1 + 1) // 2
    pad_r = (k - 1) // 2
    pad = [(0, 0)] * (x.data.ndim - 1) + [(pad_l, pad_r)]
    xp = np.pad(x.data, pad)
    out = np.zeros(x.data.shape[:-2] + (c_out, L))
    w = kernels.data
    for d in range(k):
        out += np.einsum("...cl,oc->...ol", xp[..., d:d + L], w[:, :, d])

    def grad_fn(g):
        gf = g.reshape(-1, c_out, L)
        xf = xp.reshape(-1, c_in, L + pad_l + pad_r)
        gw = np.zeros_like(w)
        gxp = np.zeros_like(xf)
        for d in range(k):
            gw[:, :, d] = np.einsum("bol,bcl->oc", gf, xf[:, :, d:d + L])
            gxp[:, :, d:d + L] += np.einsum("bol,oc->bcl", gf, w[:, :, d])
        gx = gxp[:, :, pad_l:pad_l + L].reshape(x.data.shape)
        return gx, gw

    return _make(out, (x, kernels), grad_fn)


# ---------------------------------------------------------------------------
# reductions and losses

def tensor_sum(a):
    a = _as_tensor(a)
    out = np.asarray(a.data.sum())

    def grad_fn(g):
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(out, (a,), grad_fn)


def mean(a):
    a = _as_tensor(a)
    n = a.data.size
    out = np.asarray(a.data.mean())

    def grad_fn(g):
        return (np.broadcast_to(g / n, a.data.shape).copy(),)

    return _make(out, (a,), grad_fn)


def l1_distance(a, b):
    """Mean absolute difference; subgradient at ties is 0."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"l1_distance: shapes {a.data.shape} and {b.data.shape} differ")
    diff = a.data - b.data
    n = diff.size
    out = np.asarray(np.abs(diff).mean())
    sgn = np.sign(diff)

    def grad_fn(g):
        return (g * sgn / n, -(g * sgn / n))

    return _make(out, (a, b), grad_fn)


def bce_with_logits(logits, targets):
    """Mean binary cross-entropy on raw logits, computed stably."""
    logits = _as_tensor(logits)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != logits.data.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.data.shape} vs targets {y.shape}")
    z = logits.data
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    out = np.asarray(per.mean())

    def grad_fn(g):
        return (g * (_sigmoid_stable(z) - y) / n,)

    return _make(out, (logits,), grad_fn)


def softmax_cross_entropy(logits, class_indices):
    """Mean softmax cross-entropy over rows of (B, k) logits."""
    logits = _as_tensor(logits)
    z = logits.data
    if z.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects (B, k) logits, got {z.shape}")
    idx = np.asarray(class_indices).astype(np.int64).reshape(-1)
    if idx.shape[0] != z.shape[0]:
        raise ShapeError(f"softmax_cross_entropy: {z.shape[0]} rows vs {idx.shape[0]} labels")
    zmax = z.max(axis=1, keepdims=True)
    e = np.exp(z - zmax)
    p = e / e.sum(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(e.sum(axis=1))
    rows = np.arange(z.shape[0])
    out = np.asarray((lse - z[rows, idx]).mean())

    def grad_fn(g):
        gz = p.copy()
        gz[rows, idx] -= 1.0
        return (g * gz / z.shape[0],)

    return _make(out, (logits,), grad_fn)


def dropout(x, rate, rng):
    """Inverted dropout; identity when rate is 0."""
    if rate <= 0.0:
        return _as_tensor(x)
    x = _as_tensor(x)
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = x.data * keep

    def grad_fn(g):
        return (g * keep,)

    return _make(out, (x,), grad_fn)


class Parameter:
    """A named trainable tensor; names form a hierarchical dotted path."""

    __slots__ = ("name", "tensor")

    def __init__(self, name, data):
        self.name = name
        self.tensor = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)

    @property
    def data(self):
        return self.tensor.data

    @data.setter
    def data(self, value):
        self.tensor.data = np.asarray(value, dtype=np.float64)

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self):
        self.tensor.grad = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.data.shape})"
