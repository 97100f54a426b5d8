"""Hierarchically hyperbolic structures on finite graph models."""
__version__ = "0.1.0"
