"""Application Modules."""

from __future__ import annotations
