"""Minimal reverse-mode differentiation core.

Provides exactly the primitives the prediction network needs: elementwise
arithmetic, matrix products, same-padded temporal convolution, per-position
channel mixing (1x1 convolution), the usual activations, and a GRU cell built
by composition. Tensors wrap contiguous numpy arrays; every operation is
deterministic and the backward pass visits nodes in reverse topological
order, so identical inputs give bitwise-identical outputs and gradients.

No hardware acceleration, no operator fusion: values stay small enough here
that plain vectorized numpy is fast enough, and the simple graph makes the
finite-difference verifier (``gradcheck``) trustworthy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, UsageError

__all__ = [
    "Tensor",
    "GRUParams",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "relu",
    "sigmoid",
    "tanh",
    "tsum",
    "tmean",
    "reshape",
    "transpose",
    "broadcast_to",
    "stack",
    "concat",
    "gather_rows",
    "temporal_conv",
    "channel_mix",
    "gru_cell",
]

_FLOAT_DTYPES = (np.float32, np.float64)


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """An n-dimensional array participating in reverse-mode differentiation.

    ``grad`` is populated (same shape as ``data``) for every reachable tensor
    with ``requires_grad`` after calling :meth:`backward` on a scalar result.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        """Reset the gradient buffer to zeros (allocating it if absent)."""
        self.grad = np.zeros_like(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from a scalar, filling ``grad`` on reachable tensors."""
        if self.data.size != 1:
            raise UsageError(
                f"backward() requires a scalar tensor, got shape {self.shape}"
            )
        order = _toposort(self)
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{req}{nm})"

    # operator sugar; the module-level functions do the work
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return _getitem(self, key)


def as_tensor(value) -> Tensor:
    """Wrap ``value`` as a constant Tensor unless it already is one."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _toposort(root: Tensor) -> list[Tensor]:
    # Iterative DFS: recurrent decoders build chains deep enough to threaten
    # the interpreter recursion limit.
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _make(-a.data, (a,), backward)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product of 1-D/2-D operands with numpy semantics.

    Supports (m,k)@(k,n), (k,)@(k,n), and (m,k)@(k,); gradients accumulate to
    both operands.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionError(
            f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}"
        )
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(
            f"matmul: inner dimensions disagree: {a.shape} @ {b.shape}"
        )
    out_data = a.data @ b.data

    def backward(g):
        if a.ndim == 2 and b.ndim == 2:
            ga = g @ b.data.T
            gb = a.data.T @ g
        elif a.ndim == 1 and b.ndim == 2:
            ga = b.data @ g
            gb = np.outer(a.data, g)
        else:  # a 2-D, b 1-D
            ga = np.outer(g, b.data)
            gb = a.data.T @ g
        if a.requires_grad:
            a._accumulate(ga)
        if b.requires_grad:
            b._accumulate(gb)

    return _make(out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def relu(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0))

    return _make(out_data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis)

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.full_like(a.data, float(g)))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape).copy())

    return _make(out_data, (a,), backward)


def tmean(a) -> Tensor:
    a = as_tensor(a)
    return mul(tsum(a), 1.0 / a.data.size)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.shape))

    return _make(out_data, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    out_data = np.transpose(a.data, axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.transpose(g, inverse))

    return _make(out_data, (a,), backward)


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    out_data = np.broadcast_to(a.data, shape).copy()

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))

    return _make(out_data, (a,), backward)


def _getitem(a: Tensor, key) -> Tensor:
    out_data = a.data[key]
    if np.isscalar(out_data) or out_data.ndim == 0:
        out_data = np.asarray(out_data)

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            buf[key] = g
            a._accumulate(buf)

    return _make(out_data, (a,), backward)


def stack(tensors: Iterable, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise UsageError("stack() needs at least one tensor")
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"stack() requires identical shapes, got {sorted(shapes)}")
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        slices = np.moveaxis(g, axis, 0)
        for t, gs in zip(tensors, slices):
            if t.requires_grad:
                t._accumulate(gs)

    return _make(out_data, tensors, backward)


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise UsageError("concat() needs at least one tensor")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t._accumulate(g[tuple(index)])

    return _make(out_data, tensors, backward)


def gather_rows(a, indices) -> Tensor:
    """Select rows along axis 0; duplicate indices accumulate gradients."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    out_data = a.data[idx]

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            a._accumulate(buf)

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# convolution primitives
# ---------------------------------------------------------------------------


def temporal_conv(x, kernel, bias=None) -> Tensor:
    """Same-padded convolution over the trailing time axis.

    ``x`` has shape (N, C_in, T) and ``kernel`` (C_out, C_in, K) with K odd;
    each of the N rows is convolved independently, zero padding K//2 frames on
    each side so the time length is preserved.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 3:
        raise DimensionError(
            f"temporal_conv expects x (N,C,T) and kernel (C_out,C_in,K), "
            f"got {x.shape} and {kernel.shape}"
        )
    n, c_in, t = x.shape
    c_out, k_in, k = kernel.shape
    if k_in != c_in:
        raise DimensionError(
            f"temporal_conv: channel mismatch: input has {c_in}, kernel expects {k_in}"
        )
    if k % 2 != 1:
        raise DimensionError(f"temporal_conv: kernel width must be odd, got {k}")
    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)))
    out_data = np.zeros((n, c_out, t), dtype=x.data.dtype)
    for j in range(k):
        # out[n,o,t] += sum_i kernel[o,i,j] * xp[n,i,t+j]
        out_data += np.einsum("oi,nit->not", kernel.data[:, :, j], xp[:, :, j : j + t])
    parents = [x, kernel]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise DimensionError(
                f"temporal_conv: bias shape {bias.shape} != ({c_out},)"
            )
        out_data = out_data + bias.data[None, :, None]
        parents.append(bias)

    def backward(g):
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[:, :, j : j + t] += np.einsum(
                    "oi,not->nit", kernel.data[:, :, j], g
                )
            x._accumulate(gxp[:, :, pad : pad + t] if pad else gxp)
        if kernel.requires_grad:
            gk = np.zeros_like(kernel.data)
            for j in range(k):
                gk[:, :, j] = np.einsum("not,nit->oi", g, xp[:, :, j : j + t])
            kernel._accumulate(gk)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))

    return _make(out_data, parents, backward)


def channel_mix(x, weight, bias=None, axis: int = 0) -> Tensor:
    """Per-position linear map across one axis (a 1x1 convolution).

    ``weight`` has shape (C_out, C_in) where C_in is the size of ``axis`` in
    ``x``; every other position is mapped independently. Used for coordinate
    embedding, graph-stack fusion, and plan/feature fusion.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2:
        raise DimensionError(f"channel_mix: weight must be 2-D, got {weight.shape}")
    axis = axis % x.ndim
    c_out, c_in = weight.shape
    if x.shape[axis] != c_in:
        raise DimensionError(
            f"channel_mix: axis {axis} of input has size {x.shape[axis]}, "
            f"weight expects {c_in}"
        )
    xm = np.moveaxis(x.data, axis, 0)  # (C_in, ...)
    out_m = np.tensordot(weight.data, xm, axes=1)  # (C_out, ...)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise DimensionError(f"channel_mix: bias shape {bias.shape} != ({c_out},)")
        out_m = out_m + bias.data.reshape((c_out,) + (1,) * (out_m.ndim - 1))
        parents.append(bias)
    out_data = np.moveaxis(out_m, 0, axis)
    rest = tuple(range(1, xm.ndim))

    def backward(g):
        gm = np.moveaxis(g, axis, 0)
        if weight.requires_grad:
            weight._accumulate(np.tensordot(gm, xm, axes=(rest, rest)))
        if x.requires_grad:
            gx_m = np.tensordot(weight.data.T, gm, axes=1)
            x._accumulate(np.moveaxis(gx_m, 0, axis))
        if bias is not None and bias.requires_grad:
            bias._accumulate(gm.sum(axis=rest))

    return _make(out_data, parents, backward)


# ---------------------------------------------------------------------------
# recurrent cell
# ---------------------------------------------------------------------------


@dataclass
class GRUParams:
    """Weights of one GRU cell.

    Input-to-hidden weights ``w_*`` are stored as (C_in, C_h) and
    hidden-to-hidden ``u_*`` as (C_h, C_h), so both single vectors (C_in,)
    and batched rows (B, C_in) go through the same ``x @ w`` product.
    """

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    FIELDS = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")


def gru_cell(x, h, params: GRUParams) -> Tensor:
    """One GRU step with the fixed gate convention

        z = sigmoid(x w_z + h u_z + b_z)
        r = sigmoid(x w_r + h u_r + b_r)
        n = tanh(x w_h + (r * h) u_h + b_h)
        h' = (1 - z) * h + z * n

    ``x`` is (C_in,) or (B, C_in); ``h`` matches with (C_h,) or (B, C_h).
    """
    x, h = as_tensor(x), as_tensor(h)
    if x.ndim != h.ndim or (x.ndim == 2 and x.shape[0] != h.shape[0]):
        raise DimensionError(
            f"gru_cell: input and hidden batch shapes disagree: {x.shape} vs {h.shape}"
        )
    z = sigmoid(add(add(matmul(x, params.w_z), matmul(h, params.u_z)), params.b_z))
    r = sigmoid(add(add(matmul(x, params.w_r), matmul(h, params.u_r)), params.b_r))
    n = tanh(add(add(matmul(x, params.w_h), matmul(mul(r, h), params.u_h)), params.b_h))
    one_minus_z = sub(1.0, z)
    return add(mul(one_minus_z, h), mul(z, n))
