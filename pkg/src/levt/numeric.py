"""Minimal dense-tensor engine with reverse-mode differentiation.

Tensors wrap contiguous numpy float buffers (float32 by default; float64 is
available as a test mode for gradient checking). Every differentiable op
records its inputs and a backward closure on the produced tensor; calling
``backward()`` on a scalar loss walks the recorded graph in reverse
topological order and accumulates gradients additively into every
``requires_grad`` leaf.

Only the primitives a small transformer needs are provided. No GPU, no
mixed precision, no arbitrary-rank broadcasting beyond what the model uses.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

try:  # BLAS multithreading is counterproductive at the matrix sizes used here
    from threadpoolctl import threadpool_limits

    threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - best effort, falls back to env vars
    pass

DEFAULT_DTYPE = np.float32

# Additive attention-mask value. Finite so that forward passes on finite
# inputs stay finite; exp(-1e9 - max) underflows to exactly zero.
MASK_VALUE = -1e9

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense array plus optional autograd bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=DEFAULT_DTYPE)
        elif data.dtype not in (np.float32, np.float64):
            data = data.astype(DEFAULT_DTYPE)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self):
        return Tensor(self.data)

    def to_dtype(self, dtype):
        """Copy as a leaf with the given float dtype (used by the f64 grad-check mode)."""
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            self.grad = self.grad + g

    def backward(self):
        """Backpropagate from a scalar. Repeated calls accumulate leaf grads."""
        if self.data.size != 1:
            raise ConfigError(f"backward() requires a scalar loss, got shape {self.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Light operator sugar; everything routes through the op functions below.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0)) if isinstance(other, Tensor) else add(self, -other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad=False, dtype=None):
    return Tensor(np.zeros(shape, dtype=dtype or DEFAULT_DTYPE), requires_grad=requires_grad)


def _recording(*tensors):
    return _grad_enabled and any(t.requires_grad for t in tensors)


def _make(data, parents, backward_fn):
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward_fn)
    return Tensor(data)


def _unbroadcast(g, shape):
    """Sum g down to `shape` (reverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b):
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    out = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(out, (a, b), bwd)


def mul(a, b):
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    out = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(out, (a, b), bwd)


def scale(a, s):
    out = a.data * s

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * s)

    return _make(out, (a,), bwd)


def matmul(a, b):
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return _make(out, (a, b), bwd)


def affine(x, w, b=None):
    """x @ w.T (+ b). x: (..., d_in), w: (d_out, d_in), b: (d_out,)."""
    if x.data.shape[-1] != w.data.shape[-1]:
        raise ShapeError(f"affine: x {x.shape} does not match w {w.shape}")
    if b is not None and b.data.shape != (w.data.shape[0],):
        raise ShapeError(f"affine: bias {b.shape} does not match w {w.shape}")
    lead = x.data.shape[:-1]
    x2 = x.data.reshape(-1, x.data.shape[-1])
    out = x2 @ w.data.T
    if b is not None:
        out += b.data
    out = out.reshape(*lead, w.data.shape[0])

    def bwd(g):
        g2 = g.reshape(-1, g.shape[-1])
        if x.requires_grad:
            x._accumulate((g2 @ w.data).reshape(x.data.shape))
        if w.requires_grad:
            w._accumulate(g2.T @ x2)
        if b is not None and b.requires_grad:
            b._accumulate(g2.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, bwd)


def relu(x):
    out = np.maximum(x.data, 0)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * (x.data > 0))

    return _make(out, (x,), bwd)


def softmax(x, axis=-1):
    """Numerically stable softmax (max subtraction) along `axis`."""
    m = x.data.max(axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out = e / s

    def bwd(g):
        if x.requires_grad:
            dot = (g * out).sum(axis=axis, keepdims=True)
            x._accumulate(out * (g - dot))

    return _make(out, (x,), bwd)


def log_softmax(x, axis=-1):
    m = x.data.max(axis=axis, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def bwd(g):
        if x.requires_grad:
            p = np.exp(out)
            x._accumulate(g - p * g.sum(axis=axis, keepdims=True))

    return _make(out, (x,), bwd)


def layer_norm(x, gain, bias, eps=1e-5):
    """Per-row (last axis) normalisation to zero mean / unit variance, then gain/bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def bwd(g):
        d = x.data.shape[-1]
        if x.requires_grad:
            gg = g * gain.data
            s1 = gg.sum(axis=-1, keepdims=True)
            s2 = (gg * xhat).sum(axis=-1, keepdims=True)
            x._accumulate(inv * (gg - s1 / d - xhat * s2 / d))
        if gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.data.shape))

    return _make(out, (x, gain, bias), bwd)


def embedding(table, ids):
    """Row lookup. table: (V, d) Tensor, ids: int ndarray of any shape -> (*ids.shape, d)."""
    ids = np.asarray(ids)
    out = table.data[ids]

    def bwd(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, ids.reshape(-1), g.reshape(-1, table.data.shape[-1]))
            table._accumulate(acc)

    return _make(out, (table,), bwd)


def reshape(x, shape):
    out = x.data.reshape(shape)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return _make(out, (x,), bwd)


def transpose(x, axes):
    out = np.ascontiguousarray(x.data.transpose(axes))
    inv = np.argsort(axes)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g.transpose(inv))

    return _make(out, (x,), bwd)


def concat(xs, axis=-1):
    out = np.concatenate([x.data for x in xs], axis=axis)
    sizes = [x.data.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        parts = np.split(g, splits, axis=axis)
        for x, gp in zip(xs, parts):
            if x.requires_grad:
                x._accumulate(gp)

    return _make(out, tuple(xs), bwd)


def slice_axis1(x, start, stop):
    """x[:, start:stop] for a 3D tensor (used for adjacent-pair features)."""
    out = x.data[:, start:stop]

    def bwd(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            acc[:, start:stop] = g
            x._accumulate(acc)

    return _make(out, (x,), bwd)


def sum_(x):
    out = np.asarray(x.data.sum(), dtype=x.dtype)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(np.broadcast_to(g, x.data.shape).astype(x.dtype, copy=False))

    return _make(out, (x,), bwd)


def mean_(x):
    n = x.data.size
    out = np.asarray(x.data.mean(), dtype=x.dtype)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(np.broadcast_to(g / n, x.data.shape).astype(x.dtype, copy=False))

    return _make(out, (x,), bwd)


def pick(x, rows, cols):
    """x[rows, cols] for a 2D tensor and equal-length index vectors -> 1D."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    out = x.data[rows, cols]

    def bwd(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            np.add.at(acc, (rows, cols), g)
            x._accumulate(acc)

    return _make(out, (x,), bwd)


def take_rows(x, rows):
    """x[rows] for a 2D tensor -> (len(rows), C)."""
    rows = np.asarray(rows, dtype=np.int64)
    out = x.data[rows]

    def bwd(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            np.add.at(acc, rows, g)
            x._accumulate(acc)

    return _make(out, (x,), bwd)


def dropout(x, p, rng):
    """Inverted dropout. No-op when p == 0."""
    if p <= 0.0:
        return x
    keep = (rng.random(x.data.shape) >= p).astype(x.dtype) / (1.0 - p)
    return mul(x, Tensor(keep))


def multi_head_attention(q, k, v, n_heads, wq, wk, wv, wo, mask=None):
    """Scaled dot-product attention with projections.

    q: (B, T, d), k/v: (B, S, d). mask, if given, is an additive tensor
    broadcastable to (B, n_heads, T, S); disallowed keys carry MASK_VALUE.
    Heads are split after projection, concatenated, and projected by wo.
    """
    d = q.data.shape[-1]
    if d % n_heads != 0:
        raise ConfigError(f"model dim {d} not divisible by {n_heads} heads")
    dh = d // n_heads
    B, T = q.data.shape[0], q.data.shape[1]
    S = k.data.shape[1]

    def project_split(x, w):
        return transpose(reshape(affine(x, w), (B, -1, n_heads, dh)), (0, 2, 1, 3))

    qh = project_split(q, wq)
    kh = project_split(k, wk)
    vh = project_split(v, wv)
    scores = scale(matmul(qh, transpose(kh, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    if mask is not None:
        scores = add(scores, mask)
    attn = softmax(scores, axis=-1)
    ctxh = matmul(attn, vh)
    ctx = reshape(transpose(ctxh, (0, 2, 1, 3)), (B, T, d))
    return affine(ctx, wo)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def lr_schedule(step, lr_max, warmup):
    """Inverse-sqrt decay with linear warmup; peak rate reached at `warmup`."""
    if step <= 0:
        return 0.0
    return lr_max * min(step / warmup, math.sqrt(warmup / step))


@dataclass
class AdamState:
    """Per-parameter moment buffers plus the schedule settings."""

    lr_max: float = 5e-4
    warmup: int = 500
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state):
    """One bias-corrected Adam update over a {name: Tensor} dict, in place.

    Parameters with no accumulated gradient are treated as zero-gradient.
    """
    state.step += 1
    t = state.step
    lr = lr_schedule(t, state.lr_max, state.warmup)
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


# ---------------------------------------------------------------------------
# Gradient checking support
# ---------------------------------------------------------------------------


def finite_difference_grad(f, leaf, h=1e-3):
    """Central finite differences of scalar f() w.r.t. leaf.data, elementwise.

    Run with float64 leaves for a trustworthy reference; `f` must re-read
    leaf.data on every call.
    """
    flat = leaf.data.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f())
        flat[i] = orig - h
        fm = float(f())
        flat[i] = orig
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(leaf.data.shape)


def max_relative_error(analytic, reference, floor=1e-3):
    """max |a - r| / max(|a|, |r|, floor) over all elements."""
    a = np.asarray(analytic, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(r)), floor)
    return float((np.abs(a - r) / denom).max())
