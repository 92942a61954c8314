"""Quantized vision transformer."""

from .allocation import (
    ALLOCATION_COLUMNS,
    SUMMARY_COLUMNS,
    RoleSummary,
    allocation_rows,
    parse_quantizer_name,
    read_allocation_csv,
    summarize_allocation,
    summary_rows,
    write_allocation_csv,
)
from .config import ARCH_PRESETS, ModelConfig, QuantMode
from .layers import (
    AttentionHead,
    Block,
    LayerNorm,
    MsaForm,
    QuantizedLinear,
    QuantizedMLP,
    QuantizedMSA,
    forward_block,
    forward_linear,
    forward_mlp,
    forward_msa,
)
from .model import (
    BitAllocation,
    VisionTransformer,
    build_model,
    collect_quantizers,
    forward_model,
    get_allocation,
    is_boundary_quantizer,
    named_parameters,
    patchify,
    quantizer_names,
    quantizer_role,
    set_allocation,
    set_quant_mode,
    weight_of,
)

__all__ = (
    "ALLOCATION_COLUMNS",
    "ARCH_PRESETS",
    "SUMMARY_COLUMNS",
    "AttentionHead",
    "BitAllocation",
    "Block",
    "LayerNorm",
    "ModelConfig",
    "MsaForm",
    "QuantMode",
    "QuantizedLinear",
    "QuantizedMLP",
    "QuantizedMSA",
    "RoleSummary",
    "VisionTransformer",
    "allocation_rows",
    "build_model",
    "collect_quantizers",
    "forward_block",
    "forward_linear",
    "forward_mlp",
    "forward_model",
    "forward_msa",
    "get_allocation",
    "is_boundary_quantizer",
    "named_parameters",
    "parse_quantizer_name",
    "patchify",
    "quantizer_names",
    "quantizer_role",
    "read_allocation_csv",
    "set_allocation",
    "set_quant_mode",
    "summarize_allocation",
    "summary_rows",
    "weight_of",
    "write_allocation_csv",
)
