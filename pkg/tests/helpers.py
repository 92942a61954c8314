from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from qvit.domain.autodiff import Tensor, backward, recording

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import NDArray


def numeric_grad(fn: Callable[[], float], tensor: Tensor, eps: float = 1e-6) -> NDArray[np.float64]:
    """Central finite differences of a scalar function w.r.t. every entry of ``tensor``."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = fn()
        flat[i] = original - eps
        minus = fn()
        flat[i] = original
        out[i] = (plus - minus) / (2 * eps)
    return grad


def analytic_grads(fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> list[NDArray[np.float64]]:
    """Run ``fn`` on a fresh tape and return the gradients of ``tensors``."""
    for tensor in tensors:
        tensor.zero_grad()
    with recording():
        loss = fn()
    backward(loss)
    return [np.zeros_like(t.data) if t.grad is None else t.grad for t in tensors]
