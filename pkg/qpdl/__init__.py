"""Quasi-periodic dispersive laboratory."""

__version__ = "0.1.0"
