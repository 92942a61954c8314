"""Differentiable BitOPs and the quadratic hinge budget penalty."""

from __future__ import annotations

from collections import defaultdict
from typing import TYPE_CHECKING, Literal

import numpy as np

from qvit.config.constants import BIT_MAX, BIT_MIN
from qvit.domain.autodiff import Tensor, custom_node
from qvit.domain.quant import clamp_bit_grad
from qvit.lib.exceptions import ComputationError

from .accounting import matmul_specs, total_macs

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from qvit.domain.vit import ModelConfig, VisionTransformer

__all__ = ("PenaltyNormalization", "continuous_bitops", "normalizer", "penalty")

PenaltyNormalization = Literal["mean_bit_product", "gbitops"]


def normalizer(config: ModelConfig, normalization: PenaltyNormalization) -> float:
    """Divisor applied to BitOPs inside the penalty.

    ``mean_bit_product`` divides by the total MAC count, so the penalty sees
    the MAC-weighted mean of ``b_a * b_b``; ``gbitops`` reports in units of 1e9.
    """
    if normalization == "gbitops":
        return 1e9
    return float(total_macs(config))


def continuous_bitops(model: VisionTransformer, normalization: PenaltyNormalization = "mean_bit_product") -> Tensor:
    """Normalized BitOPs with ``clamp(b_tilde, 2, 8)`` bits, on the tape.

    Quantizers whose bit is frozen or disabled contribute their active bit
    as a constant. The gradient w.r.t. a live ``b_tilde`` is the MAC-weighted
    sum of its partner bits; at a range bound only the inward part passes.
    """
    states = {state.name: state for state in model.quantizers()}
    live = [state for state in states.values() if state.bits_trainable]
    live_index = {state.name: i for i, state in enumerate(live)}
    bits: dict[str, float] = {}
    for name, state in states.items():
        if name in live_index:
            bits[name] = min(max(state.b_tilde.item(), float(BIT_MIN)), float(BIT_MAX))
        else:
            bits[name] = float(state.active_bit())
    scale = 1.0 / normalizer(model.config, normalization)
    total = 0.0
    partner: dict[str, float] = defaultdict(float)
    for spec in matmul_specs(model.config):
        a, b = bits[spec.operand_a], bits[spec.operand_b]
        total += spec.macs * a * b
        partner[spec.operand_a] += spec.macs * b
        partner[spec.operand_b] += spec.macs * a
    slopes = [partner[s.name] * scale for s in live]
    positions = [s.b_tilde.item() for s in live]
    value = total * scale
    if not live:
        return Tensor(value)

    def backward(g: NDArray[np.float64]) -> list[NDArray[np.float64]]:
        return [clamp_bit_grad(b, np.asarray(g * slope)) for b, slope in zip(positions, slopes, strict=True)]

    return custom_node([s.b_tilde for s in live], lambda *_: value, backward, op="continuous_bitops")


def penalty(bitops: Tensor, budget: float, eta: float) -> Tensor:
    """``eta * max(C - c, 0) ** 2``; zero value and gradient at or under budget."""
    if eta < 0:
        msg = f"penalty weight must be non-negative, got {eta}"
        raise ComputationError(msg)
    excess = max(bitops.item() - budget, 0.0)
    return custom_node(
        (bitops,),
        lambda _: eta * excess * excess,
        lambda g: (g * 2.0 * eta * excess,),
        op="penalty",
    )
