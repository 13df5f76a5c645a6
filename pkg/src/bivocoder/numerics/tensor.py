"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray plus an optional gradient and a closure that
maps the output gradient back onto the inputs. backward() walks the
graph once in reverse topological order. Arrays stay in whatever float
dtype they were created with; nothing here silently promotes.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """Array node in the autodiff graph.

    data: the ndarray value. grad: ndarray of the same shape, or None
    until backward() reaches this node. Only nodes with requires_grad
    (leaves marked by the caller, or results depending on one) receive
    gradients.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: Array = arr
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], Sequence[Array | None]] | None = None

    # ---- bookkeeping ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # ---- graph plumbing --------------------------------------------------

    def backward(self, free_graph: bool = True) -> None:
        backward(self, free_graph=free_graph)

    # arithmetic operators defined at module bottom to keep the class short
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def abs(self):
        return abs_(self)


def astensor(x, like: Tensor | None = None) -> Tensor:
    """Wrap scalars/arrays as constant Tensors, matching `like`'s dtype."""
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: Array, parents: tuple[Tensor, ...],
          backward_fn: Callable[[Array], Sequence[Array | None]]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def backward(loss: Tensor, free_graph: bool = True) -> None:
    """Accumulate gradients of a scalar loss into every reachable leaf."""
    if loss.size != 1:
        raise ValueError(f"backward() needs a scalar, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("backward() on a non-finite loss")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            if g.dtype != parent.data.dtype:
                g = g.astype(parent.data.dtype)
            parent.grad = g if parent.grad is None else parent.grad + g
        if free_graph:
            node._parents = ()
            node._backward = None
            if node is not loss:
                node.grad = None


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient down to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---- elementwise binary ----------------------------------------------------


def add(a, b) -> Tensor:
    a = astensor(a, b if isinstance(b, Tensor) else None)
    b = astensor(b, a)
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), bw)


def sub(a, b) -> Tensor:
    a = astensor(a, b if isinstance(b, Tensor) else None)
    b = astensor(b, a)
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a = astensor(a, b if isinstance(b, Tensor) else None)
    b = astensor(b, a)
    out = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), bw)


def div(a, b) -> Tensor:
    a = astensor(a, b if isinstance(b, Tensor) else None)
    b = astensor(b, a)
    out = a.data / b.data

    def bw(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _make(out, (a, b), bw)


def maximum(a, b) -> Tensor:
    """Elementwise max; on exact ties the gradient goes to `a`."""
    a = astensor(a, b if isinstance(b, Tensor) else None)
    b = astensor(b, a)
    out = np.maximum(a.data, b.data)

    def bw(g):
        take_a = a.data >= b.data
        return (_unbroadcast(g * take_a, a.shape),
                _unbroadcast(g * ~take_a, b.shape))

    return _make(out, (a, b), bw)


def minimum(a, b) -> Tensor:
    a = astensor(a, b if isinstance(b, Tensor) else None)
    b = astensor(b, a)
    out = np.minimum(a.data, b.data)

    def bw(g):
        take_a = a.data <= b.data
        return (_unbroadcast(g * take_a, a.shape),
                _unbroadcast(g * ~take_a, b.shape))

    return _make(out, (a, b), bw)


def arctan2(y, x) -> Tensor:
    """Four-quadrant arctangent. Gradient at the origin is clamped to 0."""
    y = astensor(y, x if isinstance(x, Tensor) else None)
    x = astensor(x, y)
    out = np.arctan2(y.data, x.data)

    def bw(g):
        denom = x.data * x.data + y.data * y.data
        denom = np.maximum(denom, np.finfo(denom.dtype).tiny)
        return _unbroadcast(g * x.data / denom, y.shape), \
            _unbroadcast(-g * y.data / denom, x.shape)

    return _make(out, (y, x), bw)


# ---- elementwise unary ------------------------------------------------------


def exp(x: Tensor) -> Tensor:
    x = astensor(x)
    out = np.exp(x.data)

    def bw(g):
        return (g * out,)

    return _make(out, (x,), bw)


def log(x: Tensor) -> Tensor:
    x = astensor(x)
    out = np.log(x.data)

    def bw(g):
        return (g / x.data,)

    return _make(out, (x,), bw)


def sqrt(x: Tensor) -> Tensor:
    x = astensor(x)
    out = np.sqrt(x.data)

    def bw(g):
        return (g * 0.5 / np.maximum(out, np.finfo(out.dtype).tiny),)

    return _make(out, (x,), bw)


def power(x: Tensor, p: float) -> Tensor:
    x = astensor(x)
    p = float(p)
    out = x.data ** p

    def bw(g):
        return (g * p * x.data ** (p - 1.0),)

    return _make(out, (x,), bw)


def sin(x: Tensor) -> Tensor:
    x = astensor(x)
    out = np.sin(x.data)

    def bw(g):
        return (g * np.cos(x.data),)

    return _make(out, (x,), bw)


def cos(x: Tensor) -> Tensor:
    x = astensor(x)
    out = np.cos(x.data)

    def bw(g):
        return (g * -np.sin(x.data),)

    return _make(out, (x,), bw)


def abs_(x: Tensor) -> Tensor:
    """|x| with sign(x) gradient; the gradient at exactly 0 is 0."""
    x = astensor(x)
    out = np.abs(x.data)

    def bw(g):
        return (g * np.sign(x.data),)

    return _make(out, (x,), bw)


def round_(x: Tensor) -> Tensor:
    """Round to nearest integer; piecewise constant, so zero gradient."""
    x = astensor(x)
    out = np.round(x.data)

    def bw(g):
        return (np.zeros_like(x.data),)

    return _make(out, (x,), bw)


def relu(x: Tensor) -> Tensor:
    x = astensor(x)
    out = np.maximum(x.data, 0.0)

    def bw(g):
        return (g * (x.data > 0.0),)

    return _make(out, (x,), bw)


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    x = astensor(x)
    out = np.where(x.data > 0.0, x.data, x.data * slope)

    def bw(g):
        return (g * np.where(x.data > 0.0, 1.0, slope).astype(x.data.dtype),)

    return _make(out, (x,), bw)


# ---- reductions -------------------------------------------------------------


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = astensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        gx = g
        if axis is not None and not keepdims:
            gx = np.expand_dims(gx, axis)
        return (np.broadcast_to(gx, x.shape).astype(x.data.dtype, copy=False),)

    return _make(np.asarray(out), (x,), bw)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = astensor(x)
    n = x.size if axis is None else np.prod(
        [x.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))])
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


# ---- shape ops --------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    x = astensor(x)
    out = x.data.reshape(shape)

    def bw(g):
        return (g.reshape(x.shape),)

    return _make(out, (x,), bw)


def transpose(x: Tensor, axes) -> Tensor:
    x = astensor(x)
    axes = tuple(axes)
    out = np.transpose(x.data, axes)
    inv = tuple(np.argsort(axes))

    def bw(g):
        return (np.transpose(g, inv),)

    return _make(out, (x,), bw)


def getitem(x: Tensor, key) -> Tensor:
    """Basic (slice/int/ellipsis) indexing; fancy indexing uses gather_last."""
    x = astensor(x)
    out = x.data[key]

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[key] = g
        return (gx,)

    return _make(out, (x,), bw)


def concat(parts: Iterable[Tensor], axis: int = 0) -> Tensor:
    parts = [astensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        gs = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            gs.append(g[tuple(idx)])
        return gs

    return _make(out, tuple(parts), bw)


def pad_constant(x: Tensor, pad_width, value: float = 0.0) -> Tensor:
    """pad_width in np.pad format ((before, after) per axis)."""
    x = astensor(x)
    out = np.pad(x.data, pad_width, constant_values=value)

    def bw(g):
        idx = tuple(slice(b, g.shape[i] - a) for i, (b, a) in enumerate(pad_width))
        return (g[idx],)

    return _make(out, (x,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with numpy broadcasting on leading dims."""
    a = astensor(a)
    b = astensor(b)
    out = np.matmul(a.data, b.data)

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(out, (a, b), bw)


# ---- indexed gather/scatter on the last axis --------------------------------


def gather_last(x: Tensor, idx: Array) -> Tensor:
    """x (..., n), idx int array of any shape S -> out (..., *S).

    Backward scatter-adds into the source positions, so repeated indices
    (reflect padding, overlapping frames) accumulate correctly.
    """
    x = astensor(x)
    idx = np.asarray(idx)
    out = x.data[..., idx]

    def bw(g):
        gx = np.zeros_like(x.data)
        # move the source axis first so np.add.at sees a plain fancy index
        gm = np.moveaxis(gx, -1, 0)
        lead = x.ndim - 1
        gv = np.moveaxis(g, tuple(range(lead)), tuple(range(-lead, 0))) if lead else g
        np.add.at(gm, idx, gv)
        return (gx,)

    return _make(out, (x,), bw)


def scatter_add_last(frames: Tensor, idx: Array, out_size: int) -> Tensor:
    """frames (..., *S), idx int array of shape S -> out (..., out_size).

    out[..., j] = sum of frames values whose idx equals j (overlap-add).
    """
    frames = astensor(frames)
    idx = np.asarray(idx)
    lead = frames.ndim - idx.ndim
    out = np.zeros(frames.shape[:lead] + (out_size,), dtype=frames.data.dtype)
    om = np.moveaxis(out, -1, 0)
    fv = (np.moveaxis(frames.data, tuple(range(lead)), tuple(range(-lead, 0)))
          if lead else frames.data)
    np.add.at(om, idx, fv)

    def bw(g):
        return (g[..., idx],)

    return _make(out, (frames,), bw)
