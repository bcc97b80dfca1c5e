"""Lipschitz-constrained WGANs: exact W1, neural IPM estimates and depth studies."""

__version__ = "0.1.0"
