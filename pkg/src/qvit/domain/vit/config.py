from __future__ import annotations

from typing import Literal, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from qvit.config.constants import BIT_MAX, BIT_MIN, LAYERNORM_EPS

__all__ = ("ARCH_PRESETS", "ModelConfig", "QuantMode")

QuantMode = Literal["float", "uniform", "learned"]


class ModelConfig(BaseModel):
    """Shape and quantization mode of a vision transformer."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    image_size: int = Field(32, gt=0)
    patch_size: int = Field(8, gt=0)
    in_channels: int = Field(1, gt=0)
    embed_dim: int = Field(64, gt=0)
    depth: int = Field(4, gt=0)
    heads: int = Field(4, gt=0)
    mlp_dim: int = Field(128, gt=0)
    num_classes: int = Field(10, gt=1)
    quant_mode: QuantMode = "learned"
    uniform_bits: int = Field(4, ge=BIT_MIN, le=BIT_MAX, description="Interior bit-width in uniform mode")
    pre_norm: bool = Field(default=False, description="LayerNorm before each residual branch instead of after")
    head_wise_bits: bool = Field(
        default=True, description="One bit-width per attention head; False shares them across a layer"
    )
    switchable_scales: bool = Field(default=True, description="One scale per candidate bit; False keeps a single scale")
    ln_eps: float = Field(LAYERNORM_EPS, gt=0)

    @model_validator(mode="after")
    def _check_divisibility(self) -> Self:
        if self.image_size % self.patch_size:
            msg = f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}"
            raise ValueError(msg)
        if self.embed_dim % self.heads:
            msg = f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}"
            raise ValueError(msg)
        return self

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def num_patches(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def num_tokens(self) -> int:
        """Patches plus the class token."""
        return self.num_patches + 1

    @property
    def patch_dim(self) -> int:
        return self.in_channels * self.patch_size * self.patch_size

    @classmethod
    def toy(cls, **overrides: object) -> ModelConfig:
        return cls.model_validate(overrides)

    @classmethod
    def deit_tiny(cls, **overrides: object) -> ModelConfig:
        base = {
            "image_size": 224,
            "patch_size": 16,
            "in_channels": 3,
            "embed_dim": 192,
            "depth": 12,
            "heads": 3,
            "mlp_dim": 768,
            "num_classes": 1000,
        }
        return cls.model_validate(base | overrides)

    @classmethod
    def deit_small(cls, **overrides: object) -> ModelConfig:
        base = {
            "image_size": 224,
            "patch_size": 16,
            "in_channels": 3,
            "embed_dim": 384,
            "depth": 12,
            "heads": 6,
            "mlp_dim": 1536,
            "num_classes": 1000,
        }
        return cls.model_validate(base | overrides)


ARCH_PRESETS = {
    "toy": ModelConfig.toy,
    "deit-t": ModelConfig.deit_tiny,
    "deit-s": ModelConfig.deit_small,
}
