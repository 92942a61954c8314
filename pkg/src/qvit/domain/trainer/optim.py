"""Optimizers: AdamW with cosine decay for weights, plain descent for quantizers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from qvit.config.constants import SCALE_FLOOR

if TYPE_CHECKING:
    from collections.abc import Iterable

    from numpy.typing import NDArray

    from qvit.domain.autodiff import Tensor
    from qvit.domain.quant import QuantizerState

__all__ = ("AdamW", "QuantizerDescent", "cosine_lr", "decays", "zero_grads")

_NO_DECAY = frozenset({"cls_token", "pos_embed"})


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Cosine decay from ``base_lr`` to zero, no warm-up."""
    if total_steps <= 0:
        return base_lr
    progress = min(step, total_steps) / total_steps
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * progress))


def decays(name: str, tensor: Tensor) -> bool:
    """Only matrices take weight decay; biases, norms and embeddings do not."""
    return tensor.ndim >= 2 and name not in _NO_DECAY


@dataclass
class AdamW:
    lr: float
    total_steps: int
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.05
    step_count: int = 0
    exp_avg: dict[str, NDArray[np.float64]] = field(default_factory=dict)
    exp_avg_sq: dict[str, NDArray[np.float64]] = field(default_factory=dict)

    @property
    def current_lr(self) -> float:
        return cosine_lr(self.lr, self.step_count, self.total_steps)

    def step(self, params: Iterable[tuple[str, Tensor]]) -> None:
        lr = self.current_lr
        self.step_count += 1
        beta1, beta2 = self.betas
        bias1 = 1.0 - beta1**self.step_count
        bias2 = 1.0 - beta2**self.step_count
        for name, tensor in params:
            grad = tensor.grad
            if grad is None:
                continue
            m = self.exp_avg.setdefault(name, np.zeros_like(tensor.data))
            v = self.exp_avg_sq.setdefault(name, np.zeros_like(tensor.data))
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            if self.weight_decay and decays(name, tensor):
                tensor.data *= 1.0 - lr * self.weight_decay
            tensor.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


@dataclass
class QuantizerDescent:
    """``p -= lr * grad`` on bit-widths and scales; scales stay above a floor.

    Tensors shared by several states (layer-wise bits) are stepped once.
    """

    lr: float

    def step(self, states: Iterable[QuantizerState], update_bits: bool = True) -> None:
        seen: set[int] = set()
        for state in states:
            if id(state.b_tilde) in seen:
                continue
            seen.add(id(state.b_tilde))
            if update_bits and state.bits_trainable and state.b_tilde.grad is not None:
                state.b_tilde.data -= self.lr * state.b_tilde.grad
            if state.scales.grad is not None:
                state.scales.data -= self.lr * state.scales.grad
                np.maximum(state.scales.data, SCALE_FLOOR, out=state.scales.data)


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for tensor in tensors:
        tensor.zero_grad()
