"""Generalized inverses, kernel-distribution leaves and fixed-rank matrix charts."""

__version__ = "0.1.0"
