"""Quantized transformer layers and their forward passes.

Layers are plain dataclasses of tensors and quantizer states; the forward
functions are free functions so the same parameters can be run in either
the head-wise sum form or the concatenated form of multi-head attention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

from qvit.domain.autodiff import (
    Tensor,
    add,
    concat,
    gelu,
    layernorm,
    matmul,
    merge_heads,
    mul_scalar,
    softmax_lastdim,
    split_heads,
    transpose_last2,
)
from qvit.domain.quant import QuantizerState, fake_quantize
from qvit.lib.exceptions import ShapeMismatchError

if TYPE_CHECKING:
    from collections.abc import Iterator

__all__ = (
    "AttentionHead",
    "Block",
    "LayerNorm",
    "MsaForm",
    "QuantizedLinear",
    "QuantizedMLP",
    "QuantizedMSA",
    "forward_block",
    "forward_linear",
    "forward_mlp",
    "forward_msa",
)

MsaForm = Literal["sum", "concat"]


@dataclass
class QuantizedLinear:
    """``x @ W + b`` with a quantized weight and an optional input quantizer.

    ``input_quant`` is ``None`` when the input was already quantized upstream.
    """

    weight: Tensor
    weight_quant: QuantizerState
    bias: Tensor | None = None
    input_quant: QuantizerState | None = None

    def quantizers(self) -> Iterator[QuantizerState]:
        if self.input_quant is not None:
            yield self.input_quant
        yield self.weight_quant


@dataclass
class LayerNorm:
    gamma: Tensor
    beta: Tensor


@dataclass
class AttentionHead:
    """Per-head projection slices and per-head activation quantizers."""

    query: QuantizedLinear
    key: QuantizedLinear
    value: QuantizedLinear
    output: QuantizedLinear
    q_quant: QuantizerState
    k_quant: QuantizerState
    v_quant: QuantizerState
    attn_quant: QuantizerState
    out_quant: QuantizerState


@dataclass
class QuantizedMSA:
    input_quant: QuantizerState
    heads: list[AttentionHead]

    def quantizers(self) -> Iterator[QuantizerState]:
        yield self.input_quant
        for head in self.heads:
            yield head.query.weight_quant
            yield head.key.weight_quant
            yield head.value.weight_quant
            yield head.q_quant
            yield head.k_quant
            yield head.v_quant
            yield head.attn_quant
            yield head.out_quant
            yield head.output.weight_quant


@dataclass
class QuantizedMLP:
    input_quant: QuantizerState
    fc1: QuantizedLinear
    gelu_quant: QuantizerState
    fc2: QuantizedLinear

    def quantizers(self) -> Iterator[QuantizerState]:
        yield self.input_quant
        yield self.fc1.weight_quant
        yield self.gelu_quant
        yield self.fc2.weight_quant


@dataclass
class Block:
    norm1: LayerNorm
    msa: QuantizedMSA
    norm2: LayerNorm
    mlp: QuantizedMLP


def forward_linear(x: Tensor, layer: QuantizedLinear) -> Tensor:
    if layer.input_quant is not None:
        x = fake_quantize(x, layer.input_quant)
    out = matmul(x, fake_quantize(layer.weight, layer.weight_quant))
    if layer.bias is not None:
        out = add(out, layer.bias)
    return out


def _attend(q: Tensor, k: Tensor, v: Tensor, head: AttentionHead) -> Tensor:
    """Quantize ``Q``, ``K`` and ``V``, attend, and quantize the head output."""
    q_hat = fake_quantize(q, head.q_quant)
    k_hat = fake_quantize(k, head.k_quant)
    v_hat = fake_quantize(v, head.v_quant)
    logits = mul_scalar(matmul(q_hat, transpose_last2(k_hat)), 1.0 / math.sqrt(q.shape[-1]))
    attn = fake_quantize(softmax_lastdim(logits), head.attn_quant)
    return fake_quantize(matmul(attn, v_hat), head.out_quant)


def forward_msa(x: Tensor, msa: QuantizedMSA, form: MsaForm = "sum") -> Tensor:
    """Multi-head self-attention over ``[..., n, d]`` tokens.

    ``sum`` projects each head output with its own ``W_O`` slice and adds the
    results. ``concat`` concatenates the quantized per-head weights, splits
    the projected tensor into heads and projects the merged head outputs in
    one matmul; both forms compute the same values.
    """
    x_hat = fake_quantize(x, msa.input_quant)
    if form == "sum":
        out: Tensor | None = None
        for head in msa.heads:
            q = forward_linear(x_hat, head.query)
            k = forward_linear(x_hat, head.key)
            v = forward_linear(x_hat, head.value)
            contribution = forward_linear(_attend(q, k, v, head), head.output)
            out = contribution if out is None else add(out, contribution)
        if out is None:
            msg = "attention layer has no heads"
            raise ShapeMismatchError(msg)
        return out
    count = len(msa.heads)

    def stacked(pick: str, axis: int) -> Tensor:
        parts = [getattr(head, pick) for head in msa.heads]
        return concat([fake_quantize(p.weight, p.weight_quant) for p in parts], axis=axis)

    qs = split_heads(matmul(x_hat, stacked("query", -1)), count)
    ks = split_heads(matmul(x_hat, stacked("key", -1)), count)
    vs = split_heads(matmul(x_hat, stacked("value", -1)), count)
    outputs = [_attend(q, k, v, head) for q, k, v, head in zip(qs, ks, vs, msa.heads, strict=True)]
    return matmul(merge_heads(outputs), stacked("output", -2))


def forward_mlp(x: Tensor, mlp: QuantizedMLP) -> Tensor:
    hidden = forward_linear(fake_quantize(x, mlp.input_quant), mlp.fc1)
    activated = fake_quantize(gelu(hidden), mlp.gelu_quant)
    return forward_linear(activated, mlp.fc2)


def forward_block(x: Tensor, block: Block, eps: float, pre_norm: bool = False, form: MsaForm = "sum") -> Tensor:
    """One encoder block on ``[..., n, d]`` tokens.

    Post-norm: ``x1 = LN(x + MSA(x))``, ``out = LN(x1 + MLP(x1))``.
    Pre-norm: ``x1 = x + MSA(LN(x))``, ``out = x1 + MLP(LN(x1))``.
    """
    width = block.norm1.gamma.shape[0]
    if x.ndim < 2 or x.shape[-1] != width:
        msg = f"block expects [..., n, {width}] tokens, got {x.shape}"
        raise ShapeMismatchError(msg)

    def norm(t: Tensor, ln: LayerNorm) -> Tensor:
        return layernorm(t, ln.gamma, ln.beta, eps)

    if pre_norm:
        x = add(x, forward_msa(norm(x, block.norm1), block.msa, form))
        return add(x, forward_mlp(norm(x, block.norm2), block.mlp))
    x = norm(add(x, forward_msa(x, block.msa, form)), block.norm1)
    return norm(add(x, forward_mlp(x, block.mlp)), block.norm2)
