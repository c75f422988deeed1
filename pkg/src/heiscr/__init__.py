"""Sasakian, CR and sub-Riemannian geometry of the Heisenberg group."""

__version__ = "0.1.0"
