"""Numerical laboratory for twisted modular L-values and the amplified second moment."""

__version__ = "0.1.0"
