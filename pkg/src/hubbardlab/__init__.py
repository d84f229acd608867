"""Numerical tools for the dilute lattice Hubbard model."""

__version__ = "0.1.0"
