"""Shared plumbing: exceptions, report structs, run-directory helpers."""

from __future__ import annotations
