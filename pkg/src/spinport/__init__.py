"""Continuous-variable teleportation of collective spin states in trapped-ion crystals."""

__version__ = "0.1.0"
