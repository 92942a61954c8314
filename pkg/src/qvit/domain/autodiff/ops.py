"""Differentiable operations on :class:`~qvit.domain.autodiff.tensor.Tensor`.

Every op computes its forward value with numpy, checks shapes at the boundary
and registers a closed-form backward rule through :func:`emit`.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import erf

from qvit.lib.exceptions import LabelRangeError, NonFiniteError, ShapeMismatchError

from .tensor import Tensor, emit

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    Array = NDArray[np.float64]

__all__ = (
    "add",
    "broadcast_to",
    "clamp_ste",
    "concat",
    "concat_lastdim",
    "cross_entropy",
    "gelu",
    "layernorm",
    "matmul",
    "mean_all",
    "merge_heads",
    "mul",
    "mul_scalar",
    "reshape",
    "select",
    "slice_lastdim",
    "softmax_lastdim",
    "split_heads",
    "sub",
    "sum_all",
    "transpose_last2",
)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        msg = f"{op}: shapes {a.shape} and {b.shape} do not broadcast"
        raise ShapeMismatchError(msg) from e


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        msg = f"matmul: cannot multiply {a.shape} by {b.shape}"
        raise ShapeMismatchError(msg)
    a_data, b_data = a.data, b.data

    def backward(g: Array) -> tuple[Array, Array]:
        return g @ np.swapaxes(b_data, -1, -2), np.swapaxes(a_data, -1, -2) @ g

    return emit("matmul", (a, b), a_data @ b_data, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("add", a, b)
    return emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("sub", a, b)
    return emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    _broadcast_shape("mul", a, b)
    a_data, b_data = a.data, b.data
    return emit("mul", (a, b), a_data * b_data, lambda g: (g * b_data, g * a_data))


def mul_scalar(x: Tensor, factor: float) -> Tensor:
    return emit("mul_scalar", (x,), x.data * factor, lambda g: (g * factor,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    source = x.shape
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as e:
        msg = f"reshape: cannot view {source} as {tuple(shape)}"
        raise ShapeMismatchError(msg) from e
    return emit("reshape", (x,), data, lambda g: (g.reshape(source),))


def transpose_last2(x: Tensor) -> Tensor:
    if x.ndim < 2:
        msg = f"transpose_last2: needs at least 2 axes, got {x.shape}"
        raise ShapeMismatchError(msg)
    return emit("transpose_last2", (x,), np.swapaxes(x.data, -1, -2), lambda g: (np.swapaxes(g, -1, -2),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    target = tuple(shape)
    try:
        data = np.broadcast_to(x.data, target).copy()
    except ValueError as e:
        msg = f"broadcast_to: {x.shape} does not broadcast to {target}"
        raise ShapeMismatchError(msg) from e
    # the tape sums the upstream gradient back down to x.shape
    return emit("broadcast_to", (x,), data, lambda g: (g,))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        msg = "concat: nothing to concatenate"
        raise ShapeMismatchError(msg)
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        msg = f"concat: shapes {[t.shape for t in tensors]} disagree off axis {axis}"
        raise ShapeMismatchError(msg) from e
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: Array) -> list[Array]:
        return list(np.split(g, bounds, axis=axis))

    return emit("concat", tuple(tensors), data, backward)


def concat_lastdim(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=-1)


def slice_lastdim(x: Tensor, start: int, stop: int) -> Tensor:
    width = x.shape[-1]
    if not 0 <= start < stop <= width:
        msg = f"slice_lastdim: [{start}:{stop}] outside last axis of {x.shape}"
        raise ShapeMismatchError(msg)
    source = x.shape

    def backward(g: Array) -> tuple[Array]:
        full = np.zeros(source)
        full[..., start:stop] = g
        return (full,)

    return emit("slice_lastdim", (x,), x.data[..., start:stop].copy(), backward)


def split_heads(x: Tensor, heads: int) -> list[Tensor]:
    """``[..., n, h*d_h]`` to ``h`` tensors of shape ``[..., n, d_h]``."""
    width = x.shape[-1]
    if heads < 1 or width % heads:
        msg = f"split_heads: last axis {width} is not divisible into {heads} heads"
        raise ShapeMismatchError(msg)
    step = width // heads
    return [slice_lastdim(x, i * step, (i + 1) * step) for i in range(heads)]


def merge_heads(heads: Sequence[Tensor]) -> Tensor:
    """Inverse of :func:`split_heads`."""
    return concat_lastdim(heads)


def select(x: Tensor, axis: int, index: int) -> Tensor:
    """Take one position along ``axis``, dropping that axis."""
    source = x.shape
    axis = axis % x.ndim
    if not -source[axis] <= index < source[axis]:
        msg = f"select: index {index} out of range for axis {axis} of {source}"
        raise ShapeMismatchError(msg)

    def backward(g: Array) -> tuple[Array]:
        full = np.zeros(source)
        np.moveaxis(full, axis, 0)[index] = g
        return (full,)

    return emit("select", (x,), np.take(x.data, index, axis=axis), backward)


def sum_all(x: Tensor) -> Tensor:
    source = x.shape
    return emit("sum_all", (x,), np.asarray(x.data.sum()), lambda g: (np.broadcast_to(g, source),))


def mean_all(x: Tensor) -> Tensor:
    source, count = x.shape, x.size
    return emit("mean_all", (x,), np.asarray(x.data.mean()), lambda g: (np.broadcast_to(g / count, source),))


def clamp_ste(x: Tensor, low: float, high: float) -> Tensor:
    """Clamp with gradient 1 strictly inside ``(low, high)`` and 0 elsewhere."""
    inside = (x.data > low) & (x.data < high)
    return emit("clamp_ste", (x,), np.clip(x.data, low, high), lambda g: (g * inside,))


def softmax_lastdim(x: Tensor) -> Tensor:
    if x.ndim < 1 or x.shape[-1] < 1:
        msg = f"softmax_lastdim: empty last axis in {x.shape}"
        raise ShapeMismatchError(msg)
    if not np.isfinite(x.data).all():
        msg = "softmax_lastdim: non-finite logits"
        raise NonFiniteError(msg)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g: Array) -> tuple[Array]:
        return (probs * (g - (g * probs).sum(axis=-1, keepdims=True)),)

    return emit("softmax_lastdim", (x,), probs, backward)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU ``x * Phi(x)``."""
    data = x.data
    cdf = 0.5 * (1.0 + erf(data * _INV_SQRT2))
    pdf = np.exp(-0.5 * data * data) * _INV_SQRT_2PI

    def backward(g: Array) -> tuple[Array]:
        return (g * (cdf + data * pdf),)

    return emit("gelu", (x,), data * cdf, backward)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float) -> Tensor:
    """Normalize over the last axis, then apply ``gamma`` and ``beta``."""
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        msg = f"layernorm: gamma {gamma.shape} / beta {beta.shape} do not match last axis {width}"
        raise ShapeMismatchError(msg)
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    gamma_data = gamma.data

    def backward(g: Array) -> tuple[Array, Array, Array]:
        g_hat = g * gamma_data
        g_x = inv_std * (
            g_hat - g_hat.mean(axis=-1, keepdims=True) - x_hat * (g_hat * x_hat).mean(axis=-1, keepdims=True)
        )
        return g_x, g * x_hat, g

    return emit("layernorm", (x, gamma, beta), x_hat * gamma_data + beta.data, backward)


def cross_entropy(logits: Tensor, labels: ArrayLike) -> Tensor:
    """Mean softmax cross-entropy of ``[B, C]`` logits against class indices."""
    if logits.ndim != 2:
        msg = f"cross_entropy: logits must be [B, C], got {logits.shape}"
        raise ShapeMismatchError(msg)
    batch, classes = logits.shape
    targets = np.asarray(labels, dtype=np.int64).reshape(-1)
    if targets.shape[0] != batch:
        msg = f"cross_entropy: {targets.shape[0]} labels for a batch of {batch}"
        raise ShapeMismatchError(msg)
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        msg = f"cross_entropy: labels must lie in [0, {classes})"
        raise LabelRangeError(msg)
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(batch)
    loss = -log_probs[rows, targets].mean()

    def backward(g: Array) -> tuple[Array]:
        grad = np.exp(log_probs)
        grad[rows, targets] -= 1.0
        return (grad * (g / batch),)

    return emit("cross_entropy", (logits,), np.asarray(loss), backward)
