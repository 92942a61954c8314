from __future__ import annotations

from qvit.lib.schema import BaseStruct

__all__ = ("EpochMetrics", "HeadProbeRow", "MlpProbeRow")


class EpochMetrics(BaseStruct):
    """One line of the newline-delimited metrics log."""

    epoch: int
    stage: str
    train_loss: float
    train_accuracy: float
    eval_accuracy: float
    lr: float
    bitops: float | None = None
    budget: float | None = None
    penalty: float | None = None
    allocation: dict[str, int] | None = None


class HeadProbeRow(BaseStruct):
    layer: int
    head: int
    bits: int
    accuracy: float
    drop: float


class MlpProbeRow(BaseStruct):
    component: str
    bits: int
    accuracy: float
    drop: float
