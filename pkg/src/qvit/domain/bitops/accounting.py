"""Per-matmul BitOPs accounting.

Only matrix products count: softmax, LayerNorm, residual and bias adds are
free. Every matmul pairs the bit-widths of the two quantizers feeding it.
MAC counts are per image.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, NamedTuple

from qvit.config.constants import BIT_MAX, BIT_MIN, FIRST_LAST_INIT_BITS
from qvit.domain.quant import discretize_bit
from qvit.domain.vit import BitAllocation, is_boundary_quantizer, quantizer_names
from qvit.lib.exceptions import ModelStateError
from qvit.lib.schema import BaseStruct

if TYPE_CHECKING:
    from collections.abc import Mapping

    from qvit.domain.vit import ModelConfig

__all__ = (
    "ENTRY_COLUMNS",
    "BitOpsEntry",
    "BitOpsReport",
    "MatmulSpec",
    "entry_rows",
    "matmul_bitops",
    "matmul_specs",
    "model_bitops",
    "total_macs",
    "uniform_allocation",
    "uniform_budget",
)

ENTRY_COLUMNS = ("name", "macs", "bits_a", "bits_b", "bitops")


class MatmulSpec(NamedTuple):
    """One matrix product and the quantizers feeding its two operands."""

    name: str
    macs: int
    operand_a: str
    operand_b: str


class BitOpsEntry(BaseStruct):
    name: str
    macs: int
    bits_a: float
    bits_b: float
    bitops: float


class BitOpsReport(BaseStruct):
    entries: list[BitOpsEntry]
    total: float
    budget: float | None = None
    over_budget: bool = False

    @property
    def total_g(self) -> float:
        return self.total / 1e9


def matmul_specs(config: ModelConfig) -> list[MatmulSpec]:
    n, d, d_h, d_m = config.num_tokens, config.embed_dim, config.head_dim, config.mlp_dim
    specs = [MatmulSpec("patch_embed", config.num_patches * d * config.patch_dim, "patch_embed.x", "patch_embed.w")]
    for layer in range(config.depth):
        msa, mlp = f"block{layer}.msa", f"block{layer}.mlp"
        for i in range(config.heads):
            head = f"{msa}.head{i}"
            specs += [
                MatmulSpec(f"{head}.q_proj", n * d * d_h, f"{msa}.x_in", f"{msa}.w_q.head{i}"),
                MatmulSpec(f"{head}.k_proj", n * d * d_h, f"{msa}.x_in", f"{msa}.w_k.head{i}"),
                MatmulSpec(f"{head}.v_proj", n * d * d_h, f"{msa}.x_in", f"{msa}.w_v.head{i}"),
                MatmulSpec(f"{head}.qk", n * n * d_h, f"{head}.q", f"{head}.k"),
                MatmulSpec(f"{head}.av", n * n * d_h, f"{head}.attn", f"{head}.v"),
                MatmulSpec(f"{head}.o_proj", n * d_h * d, f"{head}.out", f"{msa}.w_o.head{i}"),
            ]
        specs += [
            MatmulSpec(f"{mlp}.fc1", n * d * d_m, f"{mlp}.x_in", f"{mlp}.w1"),
            MatmulSpec(f"{mlp}.fc2", n * d_m * d, f"{mlp}.gelu", f"{mlp}.w2"),
        ]
    specs.append(MatmulSpec("classifier", d * config.num_classes, "classifier.x", "classifier.w"))
    return specs


def total_macs(config: ModelConfig) -> int:
    return sum(spec.macs for spec in matmul_specs(config))


def matmul_bitops(macs: int, bits_a: float, bits_b: float) -> float:
    return float(macs) * bits_a * bits_b


def _bit(alloc: Mapping[str, float], name: str, continuous: bool) -> float:
    try:
        value = float(alloc[name])
    except KeyError as e:
        msg = f"allocation has no entry for quantizer {name!r}"
        raise ModelStateError(msg) from e
    if continuous:
        return min(max(value, float(BIT_MIN)), float(BIT_MAX))
    return float(discretize_bit(value))


def model_bitops(
    config: ModelConfig,
    alloc: Mapping[str, float],
    continuous: bool = False,
    budget: float | None = None,
) -> BitOpsReport:
    """BitOPs of every matmul under ``alloc``.

    Discrete mode rounds each bit like the quantizer does; continuous mode
    only clamps it to ``[2, 8]``.

    Raises:
        ModelStateError: ``alloc`` misses a quantizer feeding some matmul.
    """
    entries = []
    for spec in matmul_specs(config):
        bits_a = _bit(alloc, spec.operand_a, continuous)
        bits_b = _bit(alloc, spec.operand_b, continuous)
        entries.append(
            BitOpsEntry(
                name=spec.name,
                macs=spec.macs,
                bits_a=bits_a,
                bits_b=bits_b,
                bitops=matmul_bitops(spec.macs, bits_a, bits_b),
            )
        )
    total = float(sum(entry.bitops for entry in entries))
    return BitOpsReport(
        entries=entries,
        total=total,
        budget=budget,
        over_budget=budget is not None and total > budget,
    )


def uniform_allocation(config: ModelConfig, bits: int) -> BitAllocation:
    """Interior quantizers at ``bits``; patch embedding and classifier at 8."""
    if not BIT_MIN <= bits <= BIT_MAX:
        msg = f"uniform bit-width {bits} outside [{BIT_MIN}, {BIT_MAX}]"
        raise ModelStateError(msg)
    return {
        name: FIRST_LAST_INIT_BITS if is_boundary_quantizer(name) else bits for name in quantizer_names(config)
    }


def uniform_budget(config: ModelConfig, bits: int) -> float:
    """BitOPs constraint ``c`` of the ``bits``-bit uniform model."""
    return model_bitops(config, uniform_allocation(config, bits)).total


def entry_rows(report: BitOpsReport) -> list[tuple[str, int, float, float, float]]:
    return [(e.name, e.macs, e.bits_a, e.bits_b, e.bitops) for e in report.entries]
