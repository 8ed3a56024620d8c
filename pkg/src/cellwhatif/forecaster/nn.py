"""Minimal reverse-mode autodiff over float64 numpy arrays.

Just enough machinery for the sequence models in this package: broadcasted
arithmetic, batched matmul, softmax, layer norm (composed), GELU, reshapes
and slicing.  Everything runs in float64 and the backward pass walks an
explicit topological order, so gradients are reproducible bit-for-bit and
directly checkable against central finite differences (see
``training.grad_check``).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Tensor",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "reshape",
    "swapaxes",
    "concat",
    "slice_along",
    "sum_all",
    "mean_last",
    "mean_all",
    "pow_scalar",
    "softmax",
    "gelu",
    "layer_norm",
    "linear",
    "backward",
]


class Tensor:
    __slots__ = ("data", "grad", "parents", "_backward", "needs_grad")

    def __init__(self, data, parents=(), backward=None, needs_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._backward = backward
        self.needs_grad = needs_grad or any(p.needs_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, needs_grad={self.needs_grad})"


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data) -> Tensor:
    return Tensor(data, needs_grad=True)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.needs_grad:
        return
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=float)
    else:
        t.grad = t.grad + g


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=float))


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def bw():
        _accum(a, _unbroadcast(out.grad, a.data.shape))
        _accum(b, _unbroadcast(out.grad, b.data.shape))

    out._backward = bw
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data, parents=(a, b))

    def bw():
        _accum(a, _unbroadcast(out.grad, a.data.shape))
        _accum(b, _unbroadcast(-out.grad, b.data.shape))

    out._backward = bw
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def bw():
        _accum(a, _unbroadcast(out.grad * b.data, a.data.shape))
        _accum(b, _unbroadcast(out.grad * a.data, b.data.shape))

    out._backward = bw
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s, parents=(a,))

    def bw():
        _accum(a, out.grad * s)

    out._backward = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, parents=(a, b))

    def bw():
        ga = out.grad @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ out.grad
        _accum(a, _unbroadcast(ga, a.data.shape))
        _accum(b, _unbroadcast(gb, b.data.shape))

    out._backward = bw
    return out


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape
    out = Tensor(a.data.reshape(shape), parents=(a,))

    def bw():
        _accum(a, out.grad.reshape(orig))

    out._backward = bw
    return out


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    out = Tensor(np.swapaxes(a.data, i, j), parents=(a,))

    def bw():
        _accum(a, np.swapaxes(out.grad, i, j))

    out._backward = bw
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis), parents=tuple(ts))
    sizes = [t.data.shape[axis] for t in ts]

    def bw():
        splits = np.cumsum(sizes)[:-1]
        for t, g in zip(ts, np.split(out.grad, splits, axis=axis)):
            _accum(t, g)

    out._backward = bw
    return out


def slice_along(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = Tensor(a.data[idx], parents=(a,))

    def bw():
        g = np.zeros_like(a.data)
        g[idx] = out.grad
        _accum(a, g)

    out._backward = bw
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), parents=(a,))

    def bw():
        _accum(a, np.full_like(a.data, float(out.grad)))

    out._backward = bw
    return out


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.mean(), parents=(a,))

    def bw():
        _accum(a, np.full_like(a.data, float(out.grad) / n))

    out._backward = bw
    return out


def mean_last(a: Tensor) -> Tensor:
    """Mean over the last axis, keepdims."""
    n = a.data.shape[-1]
    out = Tensor(a.data.mean(axis=-1, keepdims=True), parents=(a,))

    def bw():
        _accum(a, np.broadcast_to(out.grad / n, a.data.shape))

    out._backward = bw
    return out


def pow_scalar(a: Tensor, p: float) -> Tensor:
    out = Tensor(a.data**p, parents=(a,))

    def bw():
        _accum(a, out.grad * p * a.data ** (p - 1.0))

    out._backward = bw
    return out


def softmax(a: Tensor) -> Tensor:
    """Numerically stable softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, parents=(a,))

    def bw():
        g = out.grad
        dot = (g * s).sum(axis=-1, keepdims=True)
        _accum(a, (g - dot) * s)

    out._backward = bw
    return out


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """tanh-approximation GELU with its exact derivative."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t), parents=(a,))

    def bw():
        dinner = _GELU_C * (1.0 + 3.0 * 0.044715 * x**2)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner
        _accum(a, out.grad * d)

    out._backward = bw
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = mean_last(x)
    xc = sub(x, mu)
    var = mean_last(mul(xc, xc))
    inv = pow_scalar(add(var, constant(eps)), -0.5)
    return add(mul(mul(xc, inv), gain), bias)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def backward(loss: Tensor) -> None:
    """Reverse-accumulate gradients from a scalar loss."""
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen or not node.needs_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.needs_grad:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward()
