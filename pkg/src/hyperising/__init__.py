"""Transverse-field Ising model on a discretized AdS2 chain."""

__version__ = "0.1.0"
