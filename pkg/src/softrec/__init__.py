"""Soft recovery toolkit for atomic-norm minimization."""
__version__ = "0.1.0"
