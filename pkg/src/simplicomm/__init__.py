"""Semantic communication over featured simplicial complexes."""

__version__ = "0.1.0"
