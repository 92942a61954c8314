from __future__ import annotations

BIT_MIN = 2
"""Smallest candidate bit-width."""
BIT_MAX = 8
"""Largest candidate bit-width."""
NUM_CANDIDATE_BITS = BIT_MAX - BIT_MIN + 1
"""Length of a switchable scale vector."""
FIRST_LAST_INIT_BITS = 8
"""Initial bit-width of the patch-embedding and classifier quantizers."""
MSE_GRID_SIZE = 128
"""Number of geometrically spaced candidates searched by MSE scale init."""
SCALE_FLOOR = 1e-4
"""Scales are clamped to at least this value after every optimizer step."""
FALLBACK_SCALE = 1.0
"""Scale used when a calibration sample is empty or all zero."""
LAYERNORM_EPS = 1e-5
"""Default LayerNorm epsilon."""
SYNTHETIC_NOISE = 0.3
"""Gaussian noise standard deviation of the synthetic dataset."""
CHECKPOINT_MAGIC = b"QVCK"
"""First four bytes of every checkpoint."""
CHECKPOINT_VERSION = 1
"""Checkpoint container format version."""
IDX_IMAGES_MAGIC = 0x00000803
"""IDX magic number of an unsigned-byte rank-3 tensor."""
IDX_LABELS_MAGIC = 0x00000801
"""IDX magic number of an unsigned-byte rank-1 tensor."""
