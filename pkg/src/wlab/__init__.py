"""Numerical laboratory for the Willmore functional of branched and glued surfaces."""

__version__ = "0.1.0"
