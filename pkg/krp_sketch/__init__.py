"""Khatri-Rao random projections for randomized low-rank compression."""

__version__ = "0.1.0"
