from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import structlog

from qvit.config.constants import BIT_MAX, BIT_MIN, FALLBACK_SCALE, MSE_GRID_SIZE
from qvit.domain.autodiff import Tensor
from qvit.lib.exceptions import EmptySampleError

from .quantizer import levels

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import ArrayLike, NDArray

    from .quantizer import QuantizerState

__all__ = ("candidate_scales", "init_scales", "mse_init_scale", "quantization_mse")

logger = structlog.get_logger()

_CHUNK = 16


def _flatten(samples: Tensor | ArrayLike | Sequence[ArrayLike]) -> NDArray[np.float64]:
    if isinstance(samples, Tensor):
        return samples.data.reshape(-1)
    if isinstance(samples, list | tuple) and samples and isinstance(samples[0], np.ndarray):
        return np.concatenate([np.asarray(s, dtype=np.float64).reshape(-1) for s in samples])
    return np.asarray(samples, dtype=np.float64).reshape(-1)


def candidate_scales(max_abs: float, bit: int, signed: bool) -> NDArray[np.float64]:
    """Geometric grid between ``max_abs / 2**(b+2)`` and ``2 * max_abs / q_max``."""
    q_max = levels(bit, signed).q_max
    return max_abs * np.geomspace(2.0 ** -(bit + 2), 2.0 / q_max, MSE_GRID_SIZE)


def quantization_mse(samples: ArrayLike, alpha: float, bit: int, signed: bool) -> float:
    """Mean squared error of fake-quantizing ``samples`` with a fixed scale."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    lv = levels(bit, signed)
    q = np.round(np.clip(x / alpha, -lv.q_min, lv.q_max))
    return float(np.mean((x - alpha * q) ** 2))


def mse_init_scale(samples: Tensor | ArrayLike | Sequence[ArrayLike], bit: int, signed: bool) -> float:
    """Scale minimizing the squared quantization error over the candidate grid.

    Raises:
        EmptySampleError: no samples, or every sample is zero.
    """
    x = _flatten(samples)
    if x.size == 0 or not np.any(x):
        msg = "cannot calibrate a scale from empty or all-zero samples"
        raise EmptySampleError(msg)
    lv = levels(bit, signed)
    grid = candidate_scales(float(np.abs(x).max()), bit, signed)
    errors = np.empty(grid.size)
    for start in range(0, grid.size, _CHUNK):
        alphas = grid[start : start + _CHUNK, None]
        q = np.round(np.clip(x[None, :] / alphas, -lv.q_min, lv.q_max))
        errors[start : start + _CHUNK] = np.sum((x[None, :] - alphas * q) ** 2, axis=1)
    # first minimum wins ties
    return float(grid[int(np.argmin(errors))])


def init_scales(state: QuantizerState, samples: Tensor | ArrayLike | Sequence[ArrayLike]) -> None:
    """Fill every switchable scale entry of ``state`` from ``samples``.

    A non-switchable state gets the MSE scale of its current active bit in
    every entry.
    """
    x = _flatten(samples)
    values = []
    for bit in range(BIT_MIN, BIT_MAX + 1) if state.switchable else [state.active_bit()]:
        try:
            values.append(mse_init_scale(x, bit, state.signed))
        except EmptySampleError:
            logger.warning("falling back to unit scale", quantizer=state.name, bit=bit)
            values.append(FALLBACK_SCALE)
    state.scales.data[...] = values
