"""Learnable-bit fake quantizer with switchable scales.

A quantizer owns a float bit-width ``b_tilde`` and a vector of seven scales,
one per candidate bit in ``2..8``. A quantizer built without switchable scales
uses entry 0 at every bit. The forward pass discretizes the bit,
picks the matching scale and applies scale, clamp, round and rescale. All
gradients are closed-form surrogates installed through ``custom_node``.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from qvit.config.constants import BIT_MAX, BIT_MIN, FIRST_LAST_INIT_BITS, NUM_CANDIDATE_BITS
from qvit.domain.autodiff import Tensor, custom_node
from qvit.lib.exceptions import ModelStateError, NonFiniteError, NonPositiveScaleError

from .schemas import QuantLevels, QuantRole

if TYPE_CHECKING:
    from collections.abc import Iterator

    from numpy.typing import NDArray

    Array = NDArray[np.float64]

__all__ = (
    "QuantizerState",
    "capturing",
    "clamp_bit_grad",
    "discretize",
    "discretize_bit",
    "fake_quantize",
    "levels",
    "select_scale",
)

_LN2 = math.log(2.0)
_captures: ContextVar[dict[str, list[Array]] | None] = ContextVar("qvit_quant_captures", default=None)


def _check_bit(bit: int) -> int:
    if not BIT_MIN <= bit <= BIT_MAX:
        msg = f"bit-width {bit} outside [{BIT_MIN}, {BIT_MAX}]"
        raise ModelStateError(msg)
    return bit


@dataclass
class QuantizerState:
    """Learnables of one quantizer."""

    name: str
    role: QuantRole
    signed: bool
    b_tilde: Tensor
    scales: Tensor
    frozen_bit: int | None = None
    enabled: bool = True
    switchable: bool = True

    @classmethod
    def create(
        cls,
        name: str,
        role: QuantRole,
        bit: float = FIRST_LAST_INIT_BITS,
        switchable: bool = True,
    ) -> QuantizerState:
        return cls(
            name=name,
            role=role,
            signed=role.signed,
            switchable=switchable,
            b_tilde=Tensor(float(bit), requires_grad=True, name=f"{name}.b_tilde"),
            scales=Tensor(np.ones(NUM_CANDIDATE_BITS), requires_grad=True, name=f"{name}.scales"),
        )

    def tied(self, name: str) -> QuantizerState:
        """A state named ``name`` sharing this one's ``b_tilde`` and ``scales`` tensors."""
        return replace(self, name=name, frozen_bit=None)

    def scale_index(self) -> int:
        """Entry of ``scales`` in use: the active bit's, or entry 0 when not switchable."""
        return self.active_bit() - BIT_MIN if self.switchable else 0

    def active_bit(self) -> int:
        """``frozen_bit`` when set, else the discretized ``b_tilde``."""
        if self.frozen_bit is not None:
            return self.frozen_bit
        return discretize_bit(self.b_tilde.item())

    def freeze(self, bit: int | None = None) -> None:
        self.frozen_bit = _check_bit(self.active_bit() if bit is None else int(bit))

    def unfreeze(self) -> None:
        self.frozen_bit = None

    @property
    def bits_trainable(self) -> bool:
        return self.enabled and self.frozen_bit is None

    def snapshot(self) -> QuantizerState:
        """Deep copy of the mutable state, for restore-after-probe."""
        return QuantizerState(
            name=self.name,
            role=self.role,
            signed=self.signed,
            b_tilde=Tensor(self.b_tilde.data, requires_grad=True, name=self.b_tilde.name),
            scales=Tensor(self.scales.data, requires_grad=True, name=self.scales.name),
            frozen_bit=self.frozen_bit,
            enabled=self.enabled,
            switchable=self.switchable,
        )

    def restore(self, other: QuantizerState) -> None:
        """Copy values from ``other`` into this state, keeping tensor identity."""
        self.b_tilde.data[...] = other.b_tilde.data
        self.scales.data[...] = other.scales.data
        self.frozen_bit = other.frozen_bit
        self.enabled = other.enabled


def discretize_bit(b_tilde: float) -> int:
    """Round ``clamp(b_tilde, 2, 8)`` half-to-even."""
    if not math.isfinite(b_tilde):
        msg = f"bit-width parameter is not finite: {b_tilde}"
        raise NonFiniteError(msg)
    return round(min(max(b_tilde, float(BIT_MIN)), float(BIT_MAX)))


def clamp_bit_grad(b_tilde: float, g: Array) -> Array:
    """Straight-through gradient of ``clamp(b_tilde, 2, 8)``.

    At or past a bound only gradient whose descent step points back inside passes.
    """
    if b_tilde >= BIT_MAX:
        return np.where(g > 0, g, 0.0)
    if b_tilde <= BIT_MIN:
        return np.where(g < 0, g, 0.0)
    return np.asarray(g)


def discretize(b_tilde: Tensor) -> Tensor:
    """Tape version of :func:`discretize_bit` with a clamp straight-through gradient."""
    value = b_tilde.item()

    def forward(b: Array) -> Array:
        return np.asarray(float(discretize_bit(float(b))))

    return custom_node((b_tilde,), forward, lambda g: (clamp_bit_grad(value, g),), op="discretize")


def levels(bit: int, signed: bool) -> QuantLevels:
    _check_bit(bit)
    if signed:
        return QuantLevels(q_min=2 ** (bit - 1), q_max=2 ** (bit - 1) - 1)
    return QuantLevels(q_min=0, q_max=2**bit - 1)


def select_scale(state: QuantizerState) -> Tensor:
    """The scale entry in use; only that entry receives gradient."""
    index = state.scale_index()

    def backward(g: Array) -> tuple[Array]:
        grad = np.zeros(NUM_CANDIDATE_BITS)
        grad[index] = g
        return (grad,)

    return custom_node((state.scales,), lambda s: s[index], backward, op="select_scale")


def _quantize_values(x: Array, alpha: float, lv: QuantLevels) -> tuple[Array, Array]:
    ratio = x / alpha
    return ratio, np.round(np.clip(ratio, -lv.q_min, lv.q_max))


def _fake_quantize(x: Tensor, alpha: Tensor, bit: Tensor, signed: bool) -> Tensor:
    """Core quantizer node on ``(x, alpha, bit)``.

    Surrogates: straight-through for ``x`` inside the clamp range, the LSQ
    step-size rule for ``alpha`` and the clip-boundary rule for ``bit``.
    """
    b = round(bit.item())
    lv = levels(b, signed)
    scale = alpha.item()
    if scale <= 0.0:
        msg = f"quantization scale must be positive, got {scale}"
        raise NonPositiveScaleError(msg)
    ratio, q = _quantize_values(x.data, scale, lv)
    below = ratio < -lv.q_min
    above = ratio > lv.q_max
    inside = ~(below | above)
    grad_scale = 1.0 / math.sqrt(x.size * lv.q_max)
    d_qmin = _LN2 * 2.0 ** (b - 1) if signed else 0.0
    d_qmax = _LN2 * 2.0 ** (b - 1) if signed else _LN2 * 2.0**b

    def backward(g: Array) -> tuple[Array, Array, Array]:
        d_alpha = np.where(inside, q - ratio, np.where(below, -float(lv.q_min), float(lv.q_max)))
        d_bit = scale * (above * d_qmax - below * d_qmin)
        return (
            g * inside,
            np.asarray((g * d_alpha).sum() * grad_scale),
            np.asarray((g * d_bit).sum()),
        )

    return custom_node((x, alpha, bit), lambda *_: scale * q, backward, op="fake_quantize")


def fake_quantize(x: Tensor, state: QuantizerState) -> Tensor:
    """Quantize ``x`` onto the active ``alpha`` grid.

    Disabled quantizers pass ``x`` through untouched.
    """
    captures = _captures.get()
    if captures is not None:
        captures.setdefault(state.name, []).append(x.data.copy())
    if not state.enabled:
        return x
    if state.bits_trainable:
        bit = discretize(state.b_tilde)
    else:
        bit = Tensor(float(state.active_bit()))
    return _fake_quantize(x, select_scale(state), bit, state.signed)


@contextmanager
def capturing() -> Iterator[dict[str, list[Array]]]:
    """Record every tensor entering a quantizer, keyed by quantizer name."""
    store: dict[str, list[Array]] = {}
    token = _captures.set(store)
    try:
        yield store
    finally:
        _captures.reset(token)
