# SPDX-License-Identifier: MIT
"""Differentiable mixed-precision QAT laboratory for vision transformers."""

from qvit.__about__ import __version__

__all__ = ("__version__",)
