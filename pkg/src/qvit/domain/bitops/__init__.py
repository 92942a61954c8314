"""Hardware-agnostic BitOPs model and the budget penalty."""

from .accounting import (
    ENTRY_COLUMNS,
    BitOpsEntry,
    BitOpsReport,
    MatmulSpec,
    entry_rows,
    matmul_bitops,
    matmul_specs,
    model_bitops,
    total_macs,
    uniform_allocation,
    uniform_budget,
)
from .penalty import PenaltyNormalization, continuous_bitops, normalizer, penalty

__all__ = (
    "ENTRY_COLUMNS",
    "BitOpsEntry",
    "BitOpsReport",
    "MatmulSpec",
    "PenaltyNormalization",
    "continuous_bitops",
    "entry_rows",
    "matmul_bitops",
    "matmul_specs",
    "model_bitops",
    "normalizer",
    "penalty",
    "total_macs",
    "uniform_allocation",
    "uniform_budget",
)
