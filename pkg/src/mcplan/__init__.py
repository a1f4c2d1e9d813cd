"""Lane-parallel manifold-constrained motion planning."""

__version__ = "0.1.0"
