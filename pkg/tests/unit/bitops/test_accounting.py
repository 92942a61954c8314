from __future__ import annotations

import pytest

from qvit.domain.bitops import (
    matmul_specs,
    model_bitops,
    total_macs,
    uniform_allocation,
    uniform_budget,
)
from qvit.domain.vit import ModelConfig, quantizer_names
from qvit.lib.exceptions import ModelStateError


@pytest.mark.parametrize(
    ("config", "bits", "giga"),
    [
        (ModelConfig.deit_tiny(), 4, 21.5),
        (ModelConfig.deit_tiny(), 3, 12.9),
        (ModelConfig.deit_small(), 4, 76.4),
        (ModelConfig.deit_small(), 3, 44.6),
    ],
    ids=["deit-t-4", "deit-t-3", "deit-s-4", "deit-s-3"],
)
def test_reference_budgets(config: ModelConfig, bits: int, giga: float) -> None:
    assert uniform_budget(config, bits) / 1e9 == pytest.approx(giga, rel=0.02)


def test_deit_tiny_hand_count() -> None:
    """Interior 4x4 matmuls plus 8x8 patch embedding and classifier."""
    config = ModelConfig.deit_tiny()
    n, d, d_m = 197, 192, 768
    interior = 12 * (4 * n * d * d + 2 * n * n * d + 2 * n * d * d_m)
    boundary = 196 * d * 768 + d * 1000
    assert total_macs(config) == interior + boundary
    assert uniform_budget(config, 4) == 16 * interior + 64 * boundary


def test_specs_cover_every_matmul_once() -> None:
    config = ModelConfig.toy(depth=2, heads=3, embed_dim=48)
    specs = matmul_specs(config)
    assert len(specs) == 1 + 2 * (6 * 3 + 2) + 1
    operands = {name for spec in specs for name in (spec.operand_a, spec.operand_b)}
    assert operands == set(quantizer_names(config))


def test_discrete_rounds_and_continuous_clamps() -> None:
    config = ModelConfig.toy(depth=1, heads=1, embed_dim=16)
    alloc = {name: 4.4 for name in quantizer_names(config)}
    discrete = model_bitops(config, alloc)
    continuous = model_bitops(config, alloc, continuous=True)
    assert discrete.total == pytest.approx(16 * total_macs(config))
    assert continuous.total == pytest.approx(4.4 * 4.4 * total_macs(config))
    clamped = model_bitops(config, dict.fromkeys(alloc, 11.0), continuous=True)
    assert clamped.total == pytest.approx(64 * total_macs(config))


def test_continuous_equals_discrete_on_integer_bits() -> None:
    config = ModelConfig.toy()
    alloc = {name: 2 + i % 7 for i, name in enumerate(quantizer_names(config))}
    assert model_bitops(config, alloc).total == model_bitops(config, alloc, continuous=True).total


def test_monotone_in_every_bit() -> None:
    config = ModelConfig.toy(depth=1, heads=2, embed_dim=16)
    base = uniform_allocation(config, 4)
    reference = model_bitops(config, base).total
    for name in base:
        assert model_bitops(config, {**base, name: 5}).total > reference


def test_budget_flag() -> None:
    config = ModelConfig.toy()
    budget = uniform_budget(config, 4)
    assert not model_bitops(config, uniform_allocation(config, 4), budget=budget).over_budget
    assert model_bitops(config, uniform_allocation(config, 5), budget=budget).over_budget


def test_missing_entry_raises() -> None:
    config = ModelConfig.toy()
    alloc = uniform_allocation(config, 4)
    del alloc["block0.msa.head0.attn"]
    with pytest.raises(ModelStateError, match="block0.msa.head0.attn"):
        model_bitops(config, alloc)


def test_uniform_allocation_range() -> None:
    with pytest.raises(ModelStateError):
        uniform_allocation(ModelConfig.toy(), 1)
