"""Synthetic and IDX datasets."""

from .dataset import Dataset, batches, gen_synthetic, synthetic_templates
from .idx import load_idx, read_idx_images, read_idx_labels, write_idx
from .spec import DataSpec, Split, load_split

__all__ = (
    "DataSpec",
    "Dataset",
    "Split",
    "batches",
    "gen_synthetic",
    "load_idx",
    "load_split",
    "read_idx_images",
    "read_idx_labels",
    "synthetic_templates",
    "write_idx",
)
