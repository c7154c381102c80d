"""Differentiable operations.

Every op takes and returns :class:`Tensor`. If no operand lives on a tape
the result is a constant and nothing is recorded. Leading batch dimensions
are accepted throughout; ``add`` and ``hadamard`` follow numpy broadcasting
so a bias or a shared weight matrix can meet a minibatch.
"""

from __future__ import annotations

from typing import Literal, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tape import ContractError, DimensionError, Tensor, tape_of

Activation = Literal["relu", "tanh", "sigmoid", "identity"]
Padding = Literal["same", "valid"]


def _apply(op: str, value: np.ndarray, parents: Sequence[Tensor], vjp) -> Tensor:
    tape = tape_of(*parents)
    if tape is None:
        return Tensor(value)
    return tape.record(op, value, parents, vjp)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead:
        g = g.sum(axis=tuple(range(lead)))
    keep = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g


def _check_broadcast(op: str, a: tuple, b: tuple) -> None:
    try:
        np.broadcast_shapes(a, b)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a} and {b}") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("add", a.shape, b.shape)
    out = a.data + b.data
    sa, sb = a.shape, b.shape

    def vjp(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _apply("add", out, (a, b), vjp)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("hadamard", a.shape, b.shape)
    av, bv = a.data, b.data
    out = av * bv
    sa, sb = a.shape, b.shape

    def vjp(g):
        return _unbroadcast(g * bv, sa), _unbroadcast(g * av, sb)

    return _apply("hadamard", out, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes (numpy ``@`` semantics)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.data, b.data
    out = av @ bv
    sa, sb = a.shape, b.shape

    def vjp(g):
        da = g @ np.swapaxes(bv, -1, -2)
        db = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(da, sa), _unbroadcast(db, sb)

    return _apply("matmul", out, (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.data.ndim < 2:
        raise DimensionError(f"transpose: need at least 2 dims, got {a.shape}")
    out = np.swapaxes(a.data, -1, -2)
    return _apply("transpose", out, (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}") from None
    src = a.shape
    return _apply("reshape", out, (a,), lambda g: (g.reshape(src),))


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        shapes = [p.shape for p in parts]
        raise DimensionError(f"concat: incompatible shapes {shapes}") from exc
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _apply("concat", out, parts, vjp)


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    return _apply("sum", np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    nd = x.data.ndim
    if not -nd <= axis < nd:
        raise DimensionError(f"softmax: axis {axis} invalid for shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _apply("softmax", y, (x,), vjp)


def apply_activation(x: Tensor, kind: Activation) -> Tensor:
    v = x.data
    if kind == "relu":
        mask = v > 0
        return _apply("relu", v * mask, (x,), lambda g: (g * mask,))
    if kind == "tanh":
        y = np.tanh(v)
        return _apply("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))
    if kind == "sigmoid":
        y = 0.5 * (1.0 + np.tanh(0.5 * v))
        return _apply("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))
    if kind == "identity":
        return x
    raise ContractError(f"unknown activation {kind!r}")


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    pred, target = _as_tensor(pred), _as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss: pred {pred.shape} vs target {target.shape}")
    diff = pred.data - target.data
    n = diff.size
    out = np.asarray(np.mean(diff * diff))

    def vjp(g):
        d = (2.0 / n) * g * diff
        return d, -d

    return _apply("mse_loss", out, (pred, target), vjp)


# -- convolutions -----------------------------------------------------------


def _same_pads(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    lo = total // 2
    return out, lo, total - lo


def conv_geometry(h: int, w: int, kh: int, kw: int, stride: int, padding: Padding):
    """Output size and (top, bottom, left, right) zero padding."""
    if stride < 1:
        raise DimensionError(f"conv: stride must be >= 1, got {stride}")
    if padding == "same":
        ho, pt, pb = _same_pads(h, kh, stride)
        wo, pl, pr = _same_pads(w, kw, stride)
    elif padding == "valid":
        if kh > h or kw > w:
            raise DimensionError(f"conv: kernel {kh}x{kw} larger than input {h}x{w}")
        ho, wo = (h - kh) // stride + 1, (w - kw) // stride + 1
        pt = pb = pl = pr = 0
    else:
        raise ContractError(f"unknown padding {padding!r}")
    if kh > h + pt + pb or kw > w + pl + pr:
        raise DimensionError(f"conv: kernel {kh}x{kw} larger than padded input")
    return (ho, wo), (pt, pb, pl, pr)


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise DimensionError(f"conv: expected CxHxW or NxCxHxW input, got {x.shape}")


def _corr(xp: np.ndarray, k: np.ndarray, stride: int, ho: int, wo: int) -> np.ndarray:
    kh, kw = k.shape[2:]
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    return np.einsum("nchwab,fcab->nfhw", cols, k, optimize=True)


def _corr_kernel_grad(xp, g, kshape, stride):
    kh, kw = kshape[2:]
    ho, wo = g.shape[2:]
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    return np.einsum("nfhw,nchwab->fcab", g, cols, optimize=True)


def _corr_input_grad(g, k, padded_shape, stride):
    n = g.shape[0]
    _, c, kh, kw = k.shape
    ho, wo = g.shape[2:]
    dxp = np.zeros((n, c) + tuple(padded_shape))
    for a in range(kh):
        for b in range(kw):
            contrib = np.einsum("nfhw,fc->nchw", g, k[:, :, a, b], optimize=True)
            dxp[:, :, a:a + stride * (ho - 1) + 1:stride, b:b + stride * (wo - 1) + 1:stride] += contrib
    return dxp


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, padding: Padding = "same") -> Tensor:
    """Cross-correlation of ``x`` (CxHxW or NxCxHxW) with FxCxkhxkw kernels."""
    xv, squeeze = _batched(x.data)
    kv = kernels.data
    if kv.ndim != 4 or kv.shape[1] != xv.shape[1]:
        raise DimensionError(f"conv2d: input {x.shape} incompatible with kernels {kernels.shape}")
    h, w = xv.shape[2:]
    (ho, wo), (pt, pb, pl, pr) = conv_geometry(h, w, kv.shape[2], kv.shape[3], stride, padding)
    xp = np.pad(xv, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    out = _corr(xp, kv, stride, ho, wo)

    def vjp(g):
        g4 = g[None] if squeeze else g
        dk = _corr_kernel_grad(xp, g4, kv.shape, stride)
        dxp = _corr_input_grad(g4, kv, xp.shape[2:], stride)
        dx = dxp[:, :, pt:pt + h, pl:pl + w]
        return (dx[0] if squeeze else dx), dk

    return _apply("conv2d", out[0] if squeeze else out, (x, kernels), vjp)


def conv2d_transpose(y: Tensor, kernels: Tensor, stride: int = 1) -> Tensor:
    """Adjoint of same-padded :func:`conv2d` whose input is ``stride`` times
    larger than ``y``: maps FxHxW to Cx(stride*H)x(stride*W)."""
    yv, squeeze = _batched(y.data)
    kv = kernels.data
    if kv.ndim != 4 or kv.shape[0] != yv.shape[1]:
        raise DimensionError(f"conv2d_transpose: input {y.shape} incompatible with kernels {kernels.shape}")
    h, w = yv.shape[2:]
    H, W = stride * h, stride * w
    (ho, wo), (pt, pb, pl, pr) = conv_geometry(H, W, kv.shape[2], kv.shape[3], stride, "same")
    assert (ho, wo) == (h, w)
    padded = (H + pt + pb, W + pl + pr)
    outp = _corr_input_grad(yv, kv, padded, stride)
    out = outp[:, :, pt:pt + H, pl:pl + W]

    def vjp(g):
        g4 = g[None] if squeeze else g
        gp = np.pad(g4, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
        dy = _corr(gp, kv, stride, h, w)
        dk = _corr_kernel_grad(gp, yv, kv.shape, stride)
        return (dy[0] if squeeze else dy), dk

    return _apply("conv2d_transpose", out[0] if squeeze else out, (y, kernels), vjp)
