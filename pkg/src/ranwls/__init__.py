"""Randomized weighted least squares approximation from function values."""

__version__ = "0.1.0"
