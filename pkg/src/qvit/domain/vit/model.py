"""Vision transformer assembly, naming and quantizer bookkeeping.

Quantizer names follow one scheme, shared by the model, the BitOPs
accounting and every allocation file::

    patch_embed.{x|w}
    block{l}.msa.x_in
    block{l}.msa.{w_q|w_k|w_v|w_o}.head{i}
    block{l}.msa.head{i}.{q|k|v|attn|out}
    block{l}.mlp.{x_in|w1|gelu|w2}
    classifier.{x|w}
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import structlog

from qvit.config.constants import BIT_MAX, BIT_MIN, FIRST_LAST_INIT_BITS
from qvit.domain.autodiff import Tensor, add, broadcast_to, concat, layernorm, reshape, select
from qvit.domain.quant import QuantizerState, QuantRole
from qvit.lib.exceptions import ModelStateError, ShapeMismatchError

from .layers import (
    AttentionHead,
    Block,
    LayerNorm,
    MsaForm,
    QuantizedLinear,
    QuantizedMLP,
    QuantizedMSA,
    forward_block,
    forward_linear,
)

if TYPE_CHECKING:
    from collections.abc import Mapping

    from numpy.typing import ArrayLike, NDArray

    from .config import ModelConfig, QuantMode

__all__ = (
    "BitAllocation",
    "VisionTransformer",
    "build_model",
    "collect_quantizers",
    "forward_model",
    "get_allocation",
    "is_boundary_quantizer",
    "named_parameters",
    "patchify",
    "quantizer_names",
    "quantizer_role",
    "set_allocation",
    "set_quant_mode",
    "weight_of",
)

logger = structlog.get_logger()

BitAllocation = dict[str, int]
"""Quantizer name to bit-width, in :func:`quantizer_names` order."""

_INIT_STD = 0.02
_HEAD_INDEX = re.compile(r"\.head\d+")
_HEAD_ROLES = {
    "q": QuantRole.Q_EMBED,
    "k": QuantRole.K_EMBED,
    "v": QuantRole.V_EMBED,
    "attn": QuantRole.ATTENTION_SCORE,
    "out": QuantRole.HEAD_OUTPUT,
}


@dataclass
class VisionTransformer:
    config: ModelConfig
    patch_embed: QuantizedLinear
    cls_token: Tensor
    pos_embed: Tensor
    blocks: list[Block]
    norm: LayerNorm
    classifier: QuantizedLinear
    quant_mode: QuantMode = "learned"

    def quantizers(self) -> list[QuantizerState]:
        states = list(self.patch_embed.quantizers())
        for block in self.blocks:
            states.extend(block.msa.quantizers())
            states.extend(block.mlp.quantizers())
        states.extend(self.classifier.quantizers())
        return states


def quantizer_names(config: ModelConfig) -> list[str]:
    """Every quantizer name of a model built from ``config``, in model order."""
    names = ["patch_embed.x", "patch_embed.w"]
    for layer in range(config.depth):
        prefix = f"block{layer}"
        names.append(f"{prefix}.msa.x_in")
        for head in range(config.heads):
            names.extend(f"{prefix}.msa.{w}.head{head}" for w in ("w_q", "w_k", "w_v"))
            names.extend(f"{prefix}.msa.head{head}.{part}" for part in _HEAD_ROLES)
            names.append(f"{prefix}.msa.w_o.head{head}")
        names.extend(f"{prefix}.mlp.{part}" for part in ("x_in", "w1", "gelu", "w2"))
    names.extend(("classifier.x", "classifier.w"))
    return names


def quantizer_role(name: str) -> QuantRole:
    leaf = name.rsplit(".", 1)[-1]
    if leaf in _HEAD_ROLES:
        return _HEAD_ROLES[leaf]
    if leaf in {"w", "w1", "w2"} or ".w_" in name:
        return QuantRole.WEIGHT
    return QuantRole.ACTIVATION


def is_boundary_quantizer(name: str) -> bool:
    """Patch-embedding and classifier quantizers start at 8 bits."""
    return name.startswith(("patch_embed.", "classifier."))


def _quant(name: str, config: ModelConfig, leaders: dict[str, QuantizerState] | None = None) -> QuantizerState:
    """New quantizer, or a tie to the first head's of the same role when bits are layer-wise."""
    group = _HEAD_INDEX.sub("", name)
    if leaders is not None and not config.head_wise_bits and group in leaders:
        return leaders[group].tied(name)
    state = QuantizerState.create(name, quantizer_role(name), FIRST_LAST_INIT_BITS, switchable=config.switchable_scales)
    if leaders is not None:
        leaders.setdefault(group, state)
    return state


def _weight(rng: np.random.Generator, shape: tuple[int, ...], name: str) -> Tensor:
    return Tensor(rng.normal(0.0, _INIT_STD, size=shape), requires_grad=True, name=name)


def _zeros(shape: tuple[int, ...], name: str) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def _norm(width: int, name: str) -> LayerNorm:
    return LayerNorm(
        gamma=Tensor(np.ones(width), requires_grad=True, name=f"{name}.gamma"),
        beta=_zeros((width,), f"{name}.beta"),
    )


def _build_block(config: ModelConfig, layer: int, rng: np.random.Generator) -> Block:
    d, d_h, d_m = config.embed_dim, config.head_dim, config.mlp_dim
    prefix = f"block{layer}"
    leaders: dict[str, QuantizerState] = {}
    heads = []
    for i in range(config.heads):

        def proj(kind: str, shape: tuple[int, int], index: int = i) -> QuantizedLinear:
            return QuantizedLinear(
                weight=_weight(rng, shape, f"{prefix}.msa.head{index}.{kind}"),
                weight_quant=_quant(f"{prefix}.msa.{kind}.head{index}", config, leaders),
            )

        heads.append(
            AttentionHead(
                query=proj("w_q", (d, d_h)),
                key=proj("w_k", (d, d_h)),
                value=proj("w_v", (d, d_h)),
                output=proj("w_o", (d_h, d)),
                q_quant=_quant(f"{prefix}.msa.head{i}.q", config, leaders),
                k_quant=_quant(f"{prefix}.msa.head{i}.k", config, leaders),
                v_quant=_quant(f"{prefix}.msa.head{i}.v", config, leaders),
                attn_quant=_quant(f"{prefix}.msa.head{i}.attn", config, leaders),
                out_quant=_quant(f"{prefix}.msa.head{i}.out", config, leaders),
            )
        )
    mlp = QuantizedMLP(
        input_quant=_quant(f"{prefix}.mlp.x_in", config),
        fc1=QuantizedLinear(
            weight=_weight(rng, (d, d_m), f"{prefix}.mlp.fc1.weight"),
            weight_quant=_quant(f"{prefix}.mlp.w1", config),
            bias=_zeros((d_m,), f"{prefix}.mlp.fc1.bias"),
        ),
        gelu_quant=_quant(f"{prefix}.mlp.gelu", config),
        fc2=QuantizedLinear(
            weight=_weight(rng, (d_m, d), f"{prefix}.mlp.fc2.weight"),
            weight_quant=_quant(f"{prefix}.mlp.w2", config),
            bias=_zeros((d,), f"{prefix}.mlp.fc2.bias"),
        ),
    )
    return Block(
        norm1=_norm(d, f"{prefix}.norm1"),
        msa=QuantizedMSA(input_quant=_quant(f"{prefix}.msa.x_in", config), heads=heads),
        norm2=_norm(d, f"{prefix}.norm2"),
        mlp=mlp,
    )


def build_model(config: ModelConfig, seed: int = 0) -> VisionTransformer:
    """Randomly initialized model in ``config.quant_mode``."""
    rng = np.random.default_rng(seed)
    d = config.embed_dim
    model = VisionTransformer(
        config=config,
        patch_embed=QuantizedLinear(
            weight=_weight(rng, (config.patch_dim, d), "patch_embed.weight"),
            weight_quant=_quant("patch_embed.w", config),
            bias=_zeros((d,), "patch_embed.bias"),
            input_quant=_quant("patch_embed.x", config),
        ),
        cls_token=_weight(rng, (d,), "cls_token"),
        pos_embed=_weight(rng, (config.num_tokens, d), "pos_embed"),
        blocks=[_build_block(config, layer, rng) for layer in range(config.depth)],
        norm=_norm(d, "norm"),
        classifier=QuantizedLinear(
            weight=_weight(rng, (d, config.num_classes), "classifier.weight"),
            weight_quant=_quant("classifier.w", config),
            bias=_zeros((config.num_classes,), "classifier.bias"),
            input_quant=_quant("classifier.x", config),
        ),
    )
    set_quant_mode(model, config.quant_mode, config.uniform_bits)
    return model


def _linear_tensors(linear: QuantizedLinear) -> list[Tensor]:
    return [linear.weight] if linear.bias is None else [linear.weight, linear.bias]


def named_parameters(model: VisionTransformer) -> list[tuple[str, Tensor]]:
    """Float parameters (weights, biases, norms, embeddings) in a fixed order."""
    tensors = [*_linear_tensors(model.patch_embed), model.cls_token, model.pos_embed]
    for block in model.blocks:
        tensors += [block.norm1.gamma, block.norm1.beta]
        for head in block.msa.heads:
            tensors += [head.query.weight, head.key.weight, head.value.weight, head.output.weight]
        tensors += [block.norm2.gamma, block.norm2.beta]
        tensors += [*_linear_tensors(block.mlp.fc1), *_linear_tensors(block.mlp.fc2)]
    tensors += [model.norm.gamma, model.norm.beta, *_linear_tensors(model.classifier)]
    return [(tensor.name or "", tensor) for tensor in tensors]


def collect_quantizers(model: VisionTransformer) -> list[tuple[str, QuantizerState]]:
    return [(state.name, state) for state in model.quantizers()]


def weight_of(model: VisionTransformer) -> dict[str, Tensor]:
    """Weight tensor behind every weight quantizer, keyed by quantizer name."""
    weights = {"patch_embed.w": model.patch_embed.weight, "classifier.w": model.classifier.weight}
    for block in model.blocks:
        for head in block.msa.heads:
            for linear in (head.query, head.key, head.value, head.output):
                weights[linear.weight_quant.name] = linear.weight
        weights[block.mlp.fc1.weight_quant.name] = block.mlp.fc1.weight
        weights[block.mlp.fc2.weight_quant.name] = block.mlp.fc2.weight
    return weights


def set_quant_mode(model: VisionTransformer, mode: QuantMode, bits: int | None = None) -> None:
    """Switch between float, uniform ``bits`` and learned quantization.

    Uniform mode pins interior quantizers at ``bits`` and the first and last
    layer at 8 bits; learned mode releases every frozen bit.
    """
    interior = model.config.uniform_bits if bits is None else bits
    for state in model.quantizers():
        if mode == "float":
            state.enabled = False
            continue
        state.enabled = True
        if mode == "uniform":
            bit = FIRST_LAST_INIT_BITS if is_boundary_quantizer(state.name) else interior
            state.b_tilde.data[...] = float(bit)
            state.freeze(bit)
        else:
            state.unfreeze()
    model.quant_mode = mode
    logger.debug("quant_mode_set", mode=mode, bits=interior if mode == "uniform" else None)


def get_allocation(model: VisionTransformer) -> BitAllocation:
    return {state.name: state.active_bit() for state in model.quantizers()}


def set_allocation(model: VisionTransformer, alloc: Mapping[str, float]) -> None:
    """Load bits into every quantizer and freeze them there.

    Raises:
        ModelStateError: the allocation misses a quantizer, names an unknown
            one, holds a bit that is not an integer in ``[2, 8]``, or gives
            heads that share a layer-wise bit different bits.
    """
    states = {state.name: state for state in model.quantizers()}
    missing = [name for name in states if name not in alloc]
    unknown = [name for name in alloc if name not in states]
    if missing or unknown:
        msg = f"allocation does not match the model: missing {missing[:3]}, unknown {unknown[:3]}"
        raise ModelStateError(msg)
    shared: dict[int, float] = {}
    for name, state in states.items():
        value = float(alloc[name])
        if value != round(value) or not BIT_MIN <= value <= BIT_MAX:
            msg = f"allocation bit for {name} must be an integer in [{BIT_MIN}, {BIT_MAX}], got {value}"
            raise ModelStateError(msg)
        if shared.setdefault(id(state.b_tilde), value) != value:
            msg = f"allocation bit for {name} differs from the heads it shares a layer-wise bit with"
            raise ModelStateError(msg)
    for name, state in states.items():
        state.b_tilde.data[...] = float(alloc[name])
        state.freeze(round(alloc[name]))


def patchify(images: ArrayLike, config: ModelConfig) -> NDArray[np.float64]:
    """``[B, C, H, W]`` images to ``[B, num_patches, C * p * p]`` rows."""
    data = np.asarray(images, dtype=np.float64)
    expected = (config.in_channels, config.image_size, config.image_size)
    if data.ndim != 4 or data.shape[1:] != expected:
        msg = f"expected images of shape [B, {', '.join(map(str, expected))}], got {data.shape}"
        raise ShapeMismatchError(msg)
    batch, p = data.shape[0], config.patch_size
    grid = config.image_size // p
    tiles = data.reshape(batch, config.in_channels, grid, p, grid, p).transpose(0, 2, 4, 1, 3, 5)
    return tiles.reshape(batch, config.num_patches, config.patch_dim)


def forward_model(model: VisionTransformer, images: ArrayLike, form: MsaForm = "sum") -> Tensor:
    """Logits ``[B, num_classes]`` for a batch of images."""
    config = model.config
    tokens = forward_linear(Tensor(patchify(images, config)), model.patch_embed)
    batch, d = tokens.shape[0], config.embed_dim
    cls = broadcast_to(reshape(model.cls_token, (1, 1, d)), (batch, 1, d))
    x = add(concat([cls, tokens], axis=1), model.pos_embed)
    for block in model.blocks:
        x = forward_block(x, block, config.ln_eps, config.pre_norm, form)
    x = layernorm(x, model.norm.gamma, model.norm.beta, config.ln_eps)
    return forward_linear(select(x, axis=1, index=0), model.classifier)
