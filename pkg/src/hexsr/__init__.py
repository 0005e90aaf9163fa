"""Hexagonal-sampling camera simulation, resampling, and super-resolution."""

__version__ = "0.1.0"
