"""Reverse-mode autodiff over numpy float64 arrays.

Small tape-based engine in the micrograd style: each op returns a new
Tensor holding a closure that routes the upstream gradient to its
inputs. Only the ops the models in this package need are provided.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "tensor", "param", "backward"]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "_done")

    def __init__(self, data, requires_grad: bool = False, _prev=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = _prev
        self._done = False

    # -- helpers -------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accum(self, delta: np.ndarray) -> None:
        if self.grad is None:
            self.grad = _unbroadcast(delta, self.data.shape)
        else:
            self.grad = self.grad + _unbroadcast(delta, self.data.shape)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        other = _as_tensor(other)
        out = _node(self.data + other.data, (self, other))
        if out._prev:
            def back(g, a=self, b=other):
                if a.requires_grad:
                    a._accum(g)
                if b.requires_grad:
                    b._accum(g)
            out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = _node(-self.data, (self,))
        if out._prev:
            def back(g, a=self):
                a._accum(-g)
            out._backward = back
        return out

    def __sub__(self, other):
        other = _as_tensor(other)
        out = _node(self.data - other.data, (self, other))
        if out._prev:
            def back(g, a=self, b=other):
                if a.requires_grad:
                    a._accum(g)
                if b.requires_grad:
                    b._accum(-g)
            out._backward = back
        return out

    def __rsub__(self, other):
        return _as_tensor(other).__sub__(self)

    def __mul__(self, other):
        other = _as_tensor(other)
        out = _node(self.data * other.data, (self, other))
        if out._prev:
            def back(g, a=self, b=other):
                if a.requires_grad:
                    a._accum(g * b.data)
                if b.requires_grad:
                    b._accum(g * a.data)
            out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        out = _node(self.data / other.data, (self, other))
        if out._prev:
            def back(g, a=self, b=other):
                if a.requires_grad:
                    a._accum(g / b.data)
                if b.requires_grad:
                    b._accum(-g * a.data / (b.data * b.data))
            out._backward = back
        return out

    def __rtruediv__(self, other):
        return _as_tensor(other).__truediv__(self)

    def __pow__(self, p):
        assert isinstance(p, (int, float)), "tensor exponents unsupported"
        out = _node(self.data ** p, (self,))
        if out._prev:
            def back(g, a=self, p=p):
                a._accum(g * p * a.data ** (p - 1))
            out._backward = back
        return out

    def __matmul__(self, other):
        other = _as_tensor(other)
        out = _node(np.matmul(self.data, other.data), (self, other))
        if out._prev:
            def back(g, a=self, b=other):
                if a.requires_grad:
                    a._accum(np.matmul(g, np.swapaxes(b.data, -1, -2)))
                if b.requires_grad:
                    b._accum(np.matmul(np.swapaxes(a.data, -1, -2), g))
            out._backward = back
        return out

    def __getitem__(self, idx):
        out = _node(self.data[idx], (self,))
        if out._prev:
            fancy = _has_int_array(idx)
            def back(g, a=self, idx=idx, fancy=fancy):
                full = np.zeros_like(a.data)
                if fancy:
                    np.add.at(full, idx, g)  # duplicate indices accumulate
                else:
                    full[idx] = g
                a._accum(full)
            out._backward = back
        return out

    def transpose(self, *axes):
        out = _node(np.transpose(self.data, axes), (self,))
        if out._prev:
            inv = tuple(np.argsort(axes))
            def back(g, a=self, inv=inv):
                a._accum(np.transpose(g, inv))
            out._backward = back
        return out

    # -- elementwise ---------------------------------------------------
    def exp(self):
        out = _node(np.exp(self.data), (self,))
        if out._prev:
            def back(g, a=self, y=out.data):
                a._accum(g * y)
            out._backward = back
        return out

    def log(self):
        out = _node(np.log(self.data), (self,))
        if out._prev:
            def back(g, a=self):
                a._accum(g / a.data)
            out._backward = back
        return out

    def sqrt(self):
        out = _node(np.sqrt(self.data), (self,))
        if out._prev:
            def back(g, a=self, y=out.data):
                a._accum(g * 0.5 / y)
            out._backward = back
        return out

    def tanh(self):
        out = _node(np.tanh(self.data), (self,))
        if out._prev:
            def back(g, a=self, y=out.data):
                a._accum(g * (1.0 - y * y))
            out._backward = back
        return out

    def relu(self):
        out = _node(np.maximum(self.data, 0.0), (self,))
        if out._prev:
            def back(g, a=self):
                a._accum(g * (a.data > 0.0))
            out._backward = back
        return out

    def gelu(self):
        c = 0.7978845608028654  # sqrt(2/pi)
        a = 0.044715
        inner = c * (self.data + a * self.data ** 3)
        t = np.tanh(inner)
        out = _node(0.5 * self.data * (1.0 + t), (self,))
        if out._prev:
            def back(g, x=self, t=t, c=c, a=a):
                d = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * c * (1.0 + 3.0 * a * x.data ** 2)
                x._accum(g * d)
            out._backward = back
        return out

    def sigmoid(self):
        out = _node(1.0 / (1.0 + np.exp(-self.data)), (self,))
        if out._prev:
            def back(g, a=self, y=out.data):
                a._accum(g * y * (1.0 - y))
            out._backward = back
        return out

    def clip(self, lo: float, hi: float):
        """Hard clamp; gradient is zero outside [lo, hi]."""
        out = _node(np.clip(self.data, lo, hi), (self,))
        if out._prev:
            def back(g, a=self, lo=lo, hi=hi):
                a._accum(g * ((a.data >= lo) & (a.data <= hi)))
            out._backward = back
        return out

    # -- reductions / shape --------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        out = _node(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out._prev:
            def back(g, a=self, axis=axis, keepdims=keepdims):
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                a._accum(np.broadcast_to(g, a.data.shape))
            out._backward = back
        return out

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        out = _node(self.data.reshape(*shape), (self,))
        if out._prev:
            def back(g, a=self):
                a._accum(g.reshape(a.data.shape))
            out._backward = back
        return out

    def transpose_last(self):
        """Swap the last two axes."""
        out = _node(np.swapaxes(self.data, -1, -2), (self,))
        if out._prev:
            def back(g, a=self):
                a._accum(np.swapaxes(g, -1, -2))
            out._backward = back
        return out

    def softmax(self, axis: int = -1):
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=axis, keepdims=True)
        out = _node(y, (self,))
        if out._prev:
            def back(g, a=self, y=y, axis=axis):
                dot = (g * y).sum(axis=axis, keepdims=True)
                a._accum(y * (g - dot))
            out._backward = back
        return out

    # -- autodiff driver -------------------------------------------------
    def backward(self) -> None:
        backward(self)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b in one tape node (the hot path for linear layers)."""
    out = _node(np.matmul(x.data, w.data) + b.data, (x, w, b))
    if out._prev:
        def back(g, x=x, w=w, b=b):
            if x.requires_grad:
                x._accum(np.matmul(g, np.swapaxes(w.data, -1, -2)))
            if w.requires_grad:
                w._accum(np.matmul(np.swapaxes(x.data, -1, -2), g))
            if b.requires_grad:
                b._accum(g.reshape(-1, g.shape[-1]).sum(axis=0))
        out._backward = back
    return out


def _has_int_array(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, np.ndarray) and i.dtype != bool or isinstance(i, (list, np.intp))
               for i in items)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, inputs: tuple) -> Tensor:
    prev = tuple(t for t in inputs if t.requires_grad or t._prev)
    out = Tensor(data)
    if prev:
        out.requires_grad = True
        out._prev = prev
    return out


def tensor(data) -> Tensor:
    """Constant (non-trainable) tensor."""
    return Tensor(data)


def param(data) -> Tensor:
    """Trainable leaf tensor."""
    return Tensor(data, requires_grad=True)


def concat(tensors: list, axis: int = 0) -> Tensor:
    datas = [t.data for t in tensors]
    out = _node(np.concatenate(datas, axis=axis), tuple(tensors))
    if out._prev:
        sizes = [d.shape[axis] for d in datas]
        offsets = np.cumsum([0] + sizes)
        def back(g, ts=tensors, offsets=offsets, axis=axis):
            for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
                if t.requires_grad or t._prev:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(lo, hi)
                    t._accum(g[tuple(idx)])
        out._backward = back
    return out


def stack(tensors: list, axis: int = 0) -> Tensor:
    out = _node(np.stack([t.data for t in tensors], axis=axis), tuple(tensors))
    if out._prev:
        def back(g, ts=tensors, axis=axis):
            parts = np.moveaxis(g, axis, 0)
            for t, piece in zip(ts, parts):
                if t.requires_grad or t._prev:
                    t._accum(piece)
        out._backward = back
    return out


def embedding(table: Tensor, idx: np.ndarray) -> Tensor:
    """Row lookup with scatter-add gradient (duplicate indices accumulate)."""
    idx = np.asarray(idx, dtype=np.intp)
    return table[idx]


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; single use per forward tape."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss._done:
        raise RuntimeError("tape already consumed; rebuild the forward pass before backward")
    loss._done = True
    topo: list[Tensor] = []
    seen = set()
    stack_ = [loss]
    # iterative DFS; graphs can be thousands of nodes deep
    while stack_:
        node = stack_[-1]
        nid = id(node)
        if nid in seen:
            stack_.pop()
            continue
        unvisited = [p for p in node._prev if id(p) not in seen]
        if unvisited:
            stack_.extend(unvisited)
        else:
            seen.add(nid)
            topo.append(node)
            stack_.pop()
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            node._backward = None
