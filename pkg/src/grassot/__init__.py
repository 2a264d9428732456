"""Optimal transport of quantum states over the Grassmannian of projections."""

__version__ = "0.1.0"
