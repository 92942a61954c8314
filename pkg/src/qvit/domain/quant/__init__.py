"""Learnable-bit quantizers."""

from .calibration import candidate_scales, init_scales, mse_init_scale, quantization_mse
from .quantizer import (
    QuantizerState,
    capturing,
    clamp_bit_grad,
    discretize,
    discretize_bit,
    fake_quantize,
    levels,
    select_scale,
)
from .schemas import QuantLevels, QuantRole

__all__ = (
    "QuantLevels",
    "QuantRole",
    "QuantizerState",
    "candidate_scales",
    "capturing",
    "clamp_bit_grad",
    "discretize",
    "discretize_bit",
    "fake_quantize",
    "init_scales",
    "levels",
    "mse_init_scale",
    "quantization_mse",
    "select_scale",
)
