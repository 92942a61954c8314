from __future__ import annotations

import pytest

from qvit.domain.data import Dataset, gen_synthetic
from qvit.domain.vit import ModelConfig, VisionTransformer, build_model


@pytest.fixture(name="tiny_config")
def fx_tiny_config() -> ModelConfig:
    """Two blocks, two heads, 8x8 single-channel images in 4x4 patches."""
    return ModelConfig(
        image_size=8,
        patch_size=4,
        in_channels=1,
        embed_dim=8,
        depth=2,
        heads=2,
        mlp_dim=16,
        num_classes=3,
        quant_mode="float",
    )


@pytest.fixture(name="tiny_model")
def fx_tiny_model(tiny_config: ModelConfig) -> VisionTransformer:
    return build_model(tiny_config, seed=0)


@pytest.fixture(name="tiny_dataset")
def fx_tiny_dataset(tiny_config: ModelConfig) -> Dataset:
    return gen_synthetic(3, 48, tiny_config, split="train", noise=0.1)
