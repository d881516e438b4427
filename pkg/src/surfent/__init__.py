"""Specific entropies of two-dimensional random fields along lines, polygons and curves."""

__version__ = "0.1.0"
