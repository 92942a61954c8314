"""Minimal reverse-mode automatic differentiation on numpy float64 buffers."""

from __future__ import annotations

from .ops import (
    add,
    broadcast_to,
    clamp_ste,
    concat,
    concat_lastdim,
    cross_entropy,
    gelu,
    layernorm,
    matmul,
    mean_all,
    merge_heads,
    mul,
    mul_scalar,
    reshape,
    select,
    slice_lastdim,
    softmax_lastdim,
    split_heads,
    sub,
    sum_all,
    transpose_last2,
)
from .tensor import Node, Tape, Tensor, active_tape, backward, custom_node, recording, unbroadcast

__all__ = (
    "Node",
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "backward",
    "broadcast_to",
    "clamp_ste",
    "concat",
    "concat_lastdim",
    "cross_entropy",
    "custom_node",
    "gelu",
    "layernorm",
    "matmul",
    "mean_all",
    "merge_heads",
    "mul",
    "mul_scalar",
    "recording",
    "reshape",
    "select",
    "slice_lastdim",
    "softmax_lastdim",
    "split_heads",
    "sub",
    "sum_all",
    "transpose_last2",
    "unbroadcast",
)
