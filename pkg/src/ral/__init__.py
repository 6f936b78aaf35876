"""Numerical toolkit for local additivity of Renyi entropies of entanglement."""

__version__ = "0.1.0"
