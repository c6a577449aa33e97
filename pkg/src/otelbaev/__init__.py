"""Otelbaev function of measure potentials and the spectral estimates built on it."""

__version__ = "0.1.0"
