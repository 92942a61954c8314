from __future__ import annotations

import struct
from typing import TYPE_CHECKING

import msgspec
import numpy as np
import pytest

from qvit.domain.trainer import (
    AdamW,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    restore_model,
    restore_optimizer,
    round_to_checkpoint_precision,
    save_checkpoint,
    state_digest,
)
from qvit.domain.vit import ModelConfig, VisionTransformer, build_model, forward_model, get_allocation, named_parameters
from qvit.lib.exceptions import (
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    FormatError,
    ModelStateError,
)

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture(name="quantized_model")
def fx_quantized_model(tiny_config: ModelConfig) -> VisionTransformer:
    model = build_model(tiny_config.model_copy(update={"quant_mode": "learned"}), seed=3)
    rng = np.random.default_rng(0)
    for state in model.quantizers():
        state.b_tilde.data[...] = rng.uniform(2.0, 8.0)
        state.scales.data[...] = rng.uniform(0.02, 0.2, size=7)
    model.quantizers()[5].freeze(3)
    model.quantizers()[6].enabled = False
    round_to_checkpoint_precision(model)
    return model


def _images(config: ModelConfig) -> np.ndarray:
    return np.random.default_rng(9).uniform(-1, 1, size=(4, 1, config.image_size, config.image_size))


def test_round_trip_reproduces_forward(quantized_model: VisionTransformer, tmp_path: Path) -> None:
    path = tmp_path / "model.qvck"
    save_checkpoint(path, quantized_model, epoch=7, stage="search", seed=11)
    restored = restore_model(load_checkpoint(path))
    images = _images(quantized_model.config)
    np.testing.assert_array_equal(
        forward_model(restored, images).data,
        forward_model(quantized_model, images).data,
    )
    assert state_digest(restored) == state_digest(quantized_model)
    assert get_allocation(restored) == get_allocation(quantized_model)
    assert restored.quant_mode == "learned"


def test_header_fields(quantized_model: VisionTransformer) -> None:
    ckpt = decode_checkpoint(
        encode_checkpoint(quantized_model, epoch=2, stage="dive", seed=5, metrics={"eval_accuracy": 0.5})
    )
    header = ckpt.header
    assert (header.epoch, header.stage, header.rng) == (2, "dive", {"seed": 5, "epoch": 2})
    assert header.metrics == {"eval_accuracy": 0.5}
    assert ckpt.config == quantized_model.config
    assert len(header.quantizers) == len(quantized_model.quantizers())
    assert set(header.tensors) == {name for name, _ in named_parameters(quantized_model)}


def test_identical_saves_differ_only_in_timestamp(quantized_model: VisionTransformer) -> None:
    first = decode_checkpoint(encode_checkpoint(quantized_model, epoch=1, stage="final", seed=0))
    second = decode_checkpoint(encode_checkpoint(quantized_model, epoch=1, stage="final", seed=0))
    a, b = first.header.to_dict(), second.header.to_dict()
    a.pop("created_at")
    b.pop("created_at")
    assert msgspec.json.encode(a) == msgspec.json.encode(b)


def test_optimizer_moments_round_trip(quantized_model: VisionTransformer) -> None:
    params = named_parameters(quantized_model)
    optimizer = AdamW(lr=1e-3, total_steps=10)
    for _, tensor in params:
        tensor.grad = np.full_like(tensor.data, 0.5)
    optimizer.step(params)
    ckpt = decode_checkpoint(encode_checkpoint(quantized_model, epoch=1, stage="float", seed=0, optimizer=optimizer))
    assert "optim.exp_avg.cls_token" in ckpt.arrays
    fresh = AdamW(lr=1e-3, total_steps=10)
    restore_optimizer(ckpt, fresh)
    assert fresh.step_count == 1
    np.testing.assert_allclose(fresh.exp_avg["cls_token"], optimizer.exp_avg["cls_token"], rtol=1e-6)
    np.testing.assert_allclose(fresh.exp_avg_sq["pos_embed"], optimizer.exp_avg_sq["pos_embed"], rtol=1e-6)


def test_restore_with_config_takes_weights_only(quantized_model: VisionTransformer) -> None:
    ckpt = decode_checkpoint(encode_checkpoint(quantized_model, epoch=0, stage="float", seed=0))
    uniform = quantized_model.config.model_copy(update={"quant_mode": "uniform", "uniform_bits": 5})
    model = restore_model(ckpt, uniform)
    assert model.quant_mode == "uniform"
    assert set(get_allocation(model).values()) == {5, 8}
    np.testing.assert_array_equal(model.pos_embed.data, quantized_model.pos_embed.data)
    with pytest.raises(ModelStateError):
        restore_model(ckpt, uniform.model_copy(update={"depth": 3}))


def test_bad_magic(quantized_model: VisionTransformer) -> None:
    raw = encode_checkpoint(quantized_model, epoch=0, stage="float", seed=0)
    with pytest.raises(CheckpointMagicError):
        decode_checkpoint(b"NOPE" + raw[4:])


def test_unsupported_version(quantized_model: VisionTransformer) -> None:
    raw = bytearray(encode_checkpoint(quantized_model, epoch=0, stage="float", seed=0))
    struct.pack_into("<I", raw, 4, 99)
    with pytest.raises(CheckpointVersionError):
        decode_checkpoint(bytes(raw))


@pytest.mark.parametrize("keep", [6, 40, -4])
def test_truncated(quantized_model: VisionTransformer, keep: int) -> None:
    raw = encode_checkpoint(quantized_model, epoch=0, stage="float", seed=0)
    with pytest.raises(CheckpointTruncatedError):
        decode_checkpoint(raw[:keep])


def test_trailing_bytes(quantized_model: VisionTransformer) -> None:
    raw = encode_checkpoint(quantized_model, epoch=0, stage="float", seed=0)
    with pytest.raises(FormatError):
        decode_checkpoint(raw + b"\x00" * 4)


def test_round_to_checkpoint_precision_is_idempotent(tiny_model: VisionTransformer) -> None:
    round_to_checkpoint_precision(tiny_model)
    before = state_digest(tiny_model)
    round_to_checkpoint_precision(tiny_model)
    assert state_digest(tiny_model) == before


def test_round_trip_keeps_ablation_switches(tiny_config: ModelConfig, tmp_path: Path) -> None:
    config = tiny_config.model_copy(
        update={"quant_mode": "learned", "head_wise_bits": False, "switchable_scales": False}
    )
    model = build_model(config, seed=4)
    rng = np.random.default_rng(2)
    for state in model.quantizers():
        state.b_tilde.data[...] = rng.uniform(2.0, 8.0)
        state.scales.data[...] = rng.uniform(0.02, 0.2)
    round_to_checkpoint_precision(model)
    path = tmp_path / "ablation.qvck"
    save_checkpoint(path, model, epoch=0, stage="search", seed=0)
    restored = restore_model(load_checkpoint(path))
    assert restored.config == config
    assert not any(state.switchable for state in restored.quantizers())
    states = {state.name: state for state in restored.quantizers()}
    assert states["block0.msa.head0.attn"].b_tilde is states["block0.msa.head1.attn"].b_tilde
    assert get_allocation(restored) == get_allocation(model)
    images = _images(config)
    np.testing.assert_array_equal(forward_model(restored, images).data, forward_model(model, images).data)
