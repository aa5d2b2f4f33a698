"""Spectral Galerkin simulator for the Hasegawa-Mima equation with singular density."""

__version__ = "0.1.0"
