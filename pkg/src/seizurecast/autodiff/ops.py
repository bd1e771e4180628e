"""
Differentiable operations.

Each op computes its forward value with numpy and hands ``make_result`` an
adjoint that maps the output gradient to one gradient per parent.

Shapes must match exactly for elementwise ops; a python scalar is the only
thing that broadcasts. The single exception is ``bias_add``, which spreads a
1-D bias along one axis. Convolution follows the cross-correlation
convention (no kernel flip) on row-major N×C×H×W arrays.
"""

from __future__ import annotations

from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from seizurecast.core.contracts import ContractError, DimensionError, NumericError
from seizurecast.core.types import FloatArray
from seizurecast.autodiff.tensor import Tensor, as_tensor, make_result

Scalar = Union[int, float, np.floating]


def _is_scalar(value: Any) -> bool:
    return not isinstance(value, Tensor) and np.ndim(value) == 0


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ (no broadcasting)")


def _check_finite(x: FloatArray, op: str) -> None:
    if np.isnan(x).any():
        raise NumericError(f"{op}: NaN in input")


# ── Elementwise ──────────────────────────────────────────────────────────────


def add(a: Any, b: Any) -> Tensor:
    a = as_tensor(a)
    if _is_scalar(b):
        c = float(b)
        return make_result(a.data + c, (a,), lambda g: (g,), "add")
    b = as_tensor(b)
    _same_shape(a, b, "add")
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Any, b: Any) -> Tensor:
    a = as_tensor(a)
    if _is_scalar(b):
        c = float(b)
        return make_result(a.data - c, (a,), lambda g: (g,), "sub")
    b = as_tensor(b)
    _same_shape(a, b, "sub")
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Any, b: Any) -> Tensor:
    a = as_tensor(a)
    if _is_scalar(b):
        c = float(b)
        return make_result(a.data * c, (a,), lambda g: (g * c,), "mul")
    b = as_tensor(b)
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return make_result(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def div(a: Any, b: Any) -> Tensor:
    a = as_tensor(a)
    if _is_scalar(b):
        c = float(b)
        return make_result(a.data / c, (a,), lambda g: (g / c,), "div")
    b = as_tensor(b)
    _same_shape(a, b, "div")
    ad, bd = a.data, b.data
    return make_result(ad / bd, (a, b), lambda g: (g / bd, -g * ad / (bd * bd)), "div")


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    ad = a.data
    return make_result(np.log(ad), (a,), lambda g: (g / ad,), "log")


def softplus(a: Tensor) -> Tensor:
    """ln(1 + e^a), stable for large |a|."""
    ad = a.data
    return make_result(np.logaddexp(0.0, ad), (a,), lambda g: (g * expit(ad),), "softplus")


def relu(a: Tensor) -> Tensor:
    ad = a.data
    return make_result(np.maximum(ad, 0.0), (a,), lambda g: (g * (ad > 0.0),), "relu")


# ── Reductions & shape ───────────────────────────────────────────────────────


def sum(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None) -> Tensor:  # noqa: A001
    shape = a.shape

    def adjoint(g: FloatArray) -> Tuple[FloatArray]:
        if axis is None:
            return (np.full(shape, float(g.reshape(-1)[0])),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return make_result(np.sum(a.data, axis=axis), (a,), adjoint, "sum")


def mean(a: Tensor) -> Tensor:
    return div(sum(a), float(a.size))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    out = a.data.reshape(tuple(shape))
    return make_result(out, (a,), lambda g: (g.reshape(original),), "reshape")


def flatten(a: Tensor) -> Tensor:
    """N×… → N×(…)."""
    return reshape(a, (a.shape[0], -1))


# ── Linear algebra ───────────────────────────────────────────────────────────


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data
    return make_result(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def bias_add(x: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """x + b with a 1-D *b* laid along *axis* and repeated over every other axis."""
    ax = axis % x.ndim
    if b.ndim != 1 or b.shape[0] != x.shape[ax]:
        raise DimensionError(f"bias_add: bias {b.shape} does not match axis {ax} of {x.shape}")
    view = [1] * x.ndim
    view[ax] = b.shape[0]
    others = tuple(i for i in range(x.ndim) if i != ax)
    out = x.data + b.data.reshape(view)
    return make_result(out, (x, b), lambda g: (g, g.sum(axis=others)), "bias_add")


# ── Convolution & pooling ────────────────────────────────────────────────────


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate C_in×H×W (or N×C_in×H×W) input with C_out×C_in×kh×kw kernels.

    Output spatial size is ⌊(H + 2·padding − kh) / stride⌋ + 1 (same for W).
    """
    if x.ndim not in (3, 4) or w.ndim != 4:
        raise DimensionError(f"conv2d: input {x.shape} / kernels {w.shape} have wrong rank")
    batched = x.ndim == 4
    xd = x.data if batched else x.data[None]
    n, c, h, wd = xd.shape
    c_out, c_in, kh, kw = w.shape
    if c != c_in:
        raise DimensionError(f"conv2d: input has {c} channels, kernels expect {c_in}")
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d: stride {stride} / padding {padding} out of range")
    if kh > h + 2 * padding or kw > wd + 2 * padding:
        raise DimensionError(
            f"conv2d: kernel {kh}×{kw} larger than padded input "
            f"{h + 2 * padding}×{wd + 2 * padding}"
        )

    p, s = padding, stride
    xp = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p))) if p else xd
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
    ho, wo = win.shape[2], win.shape[3]
    wdata = w.data
    out = np.einsum("nchwij,ocij->nohw", win, wdata, optimize=True)

    def adjoint(g: FloatArray) -> Tuple[FloatArray, FloatArray]:
        gb = g if batched else g[None]
        gw = np.einsum("nchwij,nohw->ocij", win, gb, optimize=True)
        gwin = np.einsum("nohw,ocij->nchwij", gb, wdata, optimize=True)
        gxp = np.zeros(xp.shape)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += gwin[:, :, :, :, i, j]
        gx = gxp[:, :, p:p + h, p:p + wd]
        return (gx if batched else gx[0], gw)

    return make_result(out if batched else out[0], (x, w), adjoint, "conv2d")


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping size×size max pooling over the last two axes; remainders are dropped."""
    if x.ndim < 2:
        raise DimensionError(f"max_pool2d: input {x.shape} needs two spatial axes")
    *lead, h, w = x.shape
    ho, wo = h // size, w // size
    if ho == 0 or wo == 0:
        raise DimensionError(f"max_pool2d: {size}×{size} window larger than input {h}×{w}")
    lead_t = tuple(lead)
    k = len(lead_t)
    cropped = x.data[..., : ho * size, : wo * size].reshape(*lead_t, ho, size, wo, size)
    order = tuple(range(k)) + (k, k + 2, k + 1, k + 3)
    blocks = cropped.transpose(order).reshape(*lead_t, ho, wo, size * size)
    idx = np.argmax(blocks, axis=-1)[..., None]
    out = np.take_along_axis(blocks, idx, axis=-1)[..., 0]
    in_shape = x.shape

    def adjoint(g: FloatArray) -> Tuple[FloatArray]:
        gblocks = np.zeros(blocks.shape)
        np.put_along_axis(gblocks, idx, g[..., None], axis=-1)
        gcrop = gblocks.reshape(*lead_t, ho, wo, size, size).transpose(order)
        gx = np.zeros(in_shape)
        gx[..., : ho * size, : wo * size] = gcrop.reshape(*lead_t, ho * size, wo * size)
        return (gx,)

    return make_result(out, (x,), adjoint, "max_pool2d")


# ── Classification heads ─────────────────────────────────────────────────────


def softmax(logits: Tensor) -> Tensor:
    """Softmax over the last axis (a vector, or row-wise over a matrix)."""
    xd = logits.data
    if xd.ndim == 0 or xd.shape[-1] < 2:
        raise ContractError(f"softmax: need at least 2 classes, got shape {logits.shape}")
    _check_finite(xd, "softmax")
    z = xd - xd.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def adjoint(g: FloatArray) -> Tuple[FloatArray]:
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return make_result(s, (logits,), adjoint, "softmax")


def softmax_array(logits: FloatArray) -> FloatArray:
    """Plain-array softmax for inference paths that never need gradients."""
    return softmax(Tensor(logits)).data


def cross_entropy(logits: Tensor, labels: Any) -> Tensor:
    """Mean categorical cross-entropy of softmax(logits) against integer labels."""
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be N×K, got {logits.shape}")
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, k = logits.shape
    if n == 0:
        raise ContractError("cross_entropy: empty batch")
    if y.shape[0] != n:
        raise DimensionError(f"cross_entropy: {n} logits rows but {y.shape[0]} labels")
    if y.min() < 0 or y.max() >= k:
        raise ContractError(f"cross_entropy: labels must lie in [0, {k})")
    xd = logits.data
    _check_finite(xd, "cross_entropy")
    z = xd - xd.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(n)
    loss = -logp[rows, y].mean()

    def adjoint(g: FloatArray) -> Tuple[FloatArray]:
        grad = np.exp(logp)
        grad[rows, y] -= 1.0
        return (grad * (float(g.reshape(-1)[0]) / n),)

    return make_result(np.asarray(loss), (logits,), adjoint, "cross_entropy")


def scale_column(x: Tensor, col: int, factor: Any) -> Tensor:
    """Multiply column *col* of a K-vector or N×K matrix by a constant (scalar or per row)."""
    f = np.asarray(factor, dtype=np.float64)
    if f.ndim > 0 and (x.ndim != 2 or f.shape != (x.shape[0],)):
        raise DimensionError(f"scale_column: factors {f.shape} do not match rows of {x.shape}")
    out = x.data.copy()
    out[..., col] = out[..., col] * f

    def adjoint(g: FloatArray) -> Tuple[FloatArray]:
        gx = g.copy()
        gx[..., col] = gx[..., col] * f
        return (gx,)

    return make_result(out, (x,), adjoint, "scale_column")


def shift_column(x: Tensor, col: int, offset: Any) -> Tensor:
    """Add a constant (scalar or per row) to column *col*."""
    o = np.asarray(offset, dtype=np.float64)
    if o.ndim > 0 and (x.ndim != 2 or o.shape != (x.shape[0],)):
        raise DimensionError(f"shift_column: offsets {o.shape} do not match rows of {x.shape}")
    out = x.data.copy()
    out[..., col] = out[..., col] + o
    return make_result(out, (x,), lambda g: (g,), "shift_column")
