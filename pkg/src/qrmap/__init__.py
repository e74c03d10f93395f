"""Qualitative relational mapping: calculus, fusion, and navigation."""

__version__ = "0.1.0"

from .states import FULL_SET, LUNE_REGIONS, N_REGIONS, StateSet  # noqa: F401
