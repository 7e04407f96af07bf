"""Threshold scattering and trapped states of dipolar pairs in van der Waals units."""
from __future__ import annotations

__version__ = "0.1.0"
