from __future__ import annotations

import math

import numpy as np
import pytest

from qvit.domain.autodiff import Tensor
from qvit.domain.quant import QuantizerState, QuantRole
from qvit.domain.trainer import AdamW, QuantizerDescent, cosine_lr
from qvit.domain.trainer.optim import decays


@pytest.mark.parametrize(
    ("step", "expected"),
    [(0, 1.0), (50, 0.5), (100, 0.0), (150, 0.0), (25, 0.5 * (1 + math.cos(math.pi / 4)))],
)
def test_cosine_schedule(step: int, expected: float) -> None:
    assert cosine_lr(1.0, step, 100) == pytest.approx(expected, abs=1e-15)


def test_cosine_without_steps_keeps_base_rate() -> None:
    assert cosine_lr(0.1, 3, 0) == 0.1


def test_weight_decay_targets() -> None:
    assert decays("block0.mlp.fc1.weight", Tensor(np.ones((2, 2))))
    assert not decays("block0.mlp.fc1.bias", Tensor(np.ones(2)))
    assert not decays("pos_embed", Tensor(np.ones((2, 2))))
    assert not decays("cls_token", Tensor(np.ones(2)))


def test_adamw_first_step_moves_by_lr() -> None:
    """With bias correction the first update is ``lr * sign(grad)`` up to eps."""
    weight = Tensor(np.array([[1.0, -1.0]]), requires_grad=True)
    bias = Tensor(np.array([0.5]), requires_grad=True)
    weight.grad = np.array([[2.0, -3.0]])
    bias.grad = np.array([0.1])
    optimizer = AdamW(lr=0.01, total_steps=10, weight_decay=0.1)
    optimizer.step([("w", weight), ("b", bias)])
    decayed = np.array([[1.0, -1.0]]) * (1 - 0.01 * 0.1)
    np.testing.assert_allclose(weight.data, decayed - 0.01 * np.array([[1.0, -1.0]]), rtol=1e-6)
    np.testing.assert_allclose(bias.data, [0.5 - 0.01], rtol=1e-6)
    assert optimizer.step_count == 1
    assert optimizer.current_lr == pytest.approx(cosine_lr(0.01, 1, 10))


def test_adamw_skips_tensors_without_gradient() -> None:
    frozen = Tensor(np.ones(3), requires_grad=True)
    AdamW(lr=0.1, total_steps=1).step([("frozen", frozen)])
    np.testing.assert_array_equal(frozen.data, np.ones(3))


def test_quantizer_descent_updates_and_floors() -> None:
    state = QuantizerState.create("block0.mlp.gelu", QuantRole.ACTIVATION, 5.0)
    state.scales.data[...] = 0.01
    state.b_tilde.grad = np.asarray(2.0)
    state.scales.grad = np.array([0.0, 0.0, 0.0, 5.0, 0.0, 0.0, -1.0])
    QuantizerDescent(lr=0.1).step([state])
    assert state.b_tilde.item() == pytest.approx(4.8)
    np.testing.assert_allclose(state.scales.data, [0.01, 0.01, 0.01, 1e-4, 0.01, 0.01, 0.11])


def test_quantizer_descent_respects_frozen_bits() -> None:
    state = QuantizerState.create("block0.mlp.gelu", QuantRole.ACTIVATION, 5.0)
    state.b_tilde.grad = np.asarray(2.0)
    QuantizerDescent(lr=0.1).step([state], update_bits=False)
    assert state.b_tilde.item() == 5.0
    state.freeze()
    QuantizerDescent(lr=0.1).step([state])
    assert state.b_tilde.item() == 5.0


def test_quantizer_descent_steps_tied_states_once() -> None:
    leader = QuantizerState.create("block0.msa.head0.q", QuantRole.Q_EMBED, 5.0)
    follower = leader.tied("block0.msa.head1.q")
    assert follower.b_tilde is leader.b_tilde
    assert follower.scales is leader.scales
    leader.b_tilde.grad = np.asarray(2.0)
    leader.scales.grad = np.full(7, -1.0)
    QuantizerDescent(lr=0.1).step([leader, follower])
    assert follower.b_tilde.item() == pytest.approx(4.8)
    np.testing.assert_allclose(follower.scales.data, np.full(7, 1.1))
