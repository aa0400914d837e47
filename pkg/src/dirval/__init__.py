"""Directional sensitivity analysis of optimal value functions of parametric programs."""

__version__ = "0.1.0"
