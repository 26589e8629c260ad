"""Subspace predictive repetitive control for blade-load rejection."""

__version__ = "0.1.0"
