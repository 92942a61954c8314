from __future__ import annotations

from enum import StrEnum
from typing import NamedTuple

__all__ = ("QuantLevels", "QuantRole")


class QuantRole(StrEnum):
    """Which tensor a quantizer sits on."""

    WEIGHT = "weight"
    ACTIVATION = "activation"
    ATTENTION_SCORE = "attention_score"
    HEAD_OUTPUT = "head_output"
    Q_EMBED = "q_embed"
    K_EMBED = "k_embed"
    V_EMBED = "v_embed"

    @property
    def signed(self) -> bool:
        """Softmax outputs live in ``[0, 1]``; everything else can go negative."""
        return self is not QuantRole.ATTENTION_SCORE


class QuantLevels(NamedTuple):
    """Number of negative (``q_min``) and positive (``q_max``) integer levels."""

    q_min: int
    q_max: int
