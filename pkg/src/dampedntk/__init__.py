"""Shallow-network gradient flow, neural tangent kernels and damped-deviations checks."""

__version__ = "0.1.0"
