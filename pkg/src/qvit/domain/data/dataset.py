from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from qvit.config.constants import SYNTHETIC_NOISE
from qvit.lib.exceptions import LabelRangeError, NonFiniteError, ShapeMismatchError

if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence

    from numpy.typing import NDArray

    from qvit.domain.vit import ModelConfig

__all__ = ("Dataset", "batches", "gen_synthetic", "synthetic_templates")


@dataclass(frozen=True)
class Dataset:
    """Images ``[N, C, H, W]`` in ``[-1, 1]`` with integer class labels."""

    images: NDArray[np.float64]
    labels: NDArray[np.int64]
    num_classes: int
    split: str = "train"

    def __post_init__(self) -> None:
        if self.images.ndim != 4 or self.images.shape[0] != self.labels.shape[0]:
            msg = f"dataset needs [N, C, H, W] images and N labels, got {self.images.shape} and {self.labels.shape}"
            raise ShapeMismatchError(msg)
        if not np.isfinite(self.images).all():
            msg = f"{self.split} images hold non-finite values"
            raise NonFiniteError(msg)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            msg = f"{self.split} labels must lie in [0, {self.num_classes})"
            raise LabelRangeError(msg)

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def synthetic_templates(seed: int, config: ModelConfig) -> NDArray[np.float64]:
    """One fixed random image per class, shared by every split of ``seed``."""
    rng = np.random.default_rng([seed, 0])
    shape = (config.num_classes, config.in_channels, config.image_size, config.image_size)
    return rng.uniform(-1.0, 1.0, size=shape)


def gen_synthetic(
    seed: int,
    count: int,
    config: ModelConfig,
    split: str = "train",
    noise: float = SYNTHETIC_NOISE,
) -> Dataset:
    """Class template plus Gaussian noise, clipped to ``[-1, 1]``.

    Splits share templates and draw samples from independent streams.
    """
    templates = synthetic_templates(seed, config)
    rng = np.random.default_rng([seed, 1, zlib.crc32(split.encode())])
    labels = rng.integers(0, config.num_classes, size=count, dtype=np.int64)
    images = templates[labels] + noise * rng.standard_normal(size=(count, *templates.shape[1:]))
    return Dataset(np.clip(images, -1.0, 1.0), labels, config.num_classes, split)


def batches(
    dataset: Dataset,
    batch_size: int,
    seed: int | Sequence[int] = 0,
    shuffle: bool = True,
) -> Iterator[tuple[NDArray[np.float64], NDArray[np.int64]]]:
    """Yield ``(images, labels)`` batches; the last batch may be short."""
    if batch_size < 1:
        msg = f"batch size must be positive, got {batch_size}"
        raise ShapeMismatchError(msg)
    order = np.random.default_rng(seed).permutation(len(dataset)) if shuffle else np.arange(len(dataset))
    for start in range(0, len(dataset), batch_size):
        index = order[start : start + batch_size]
        yield dataset.images[index], dataset.labels[index]
