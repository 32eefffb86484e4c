"""Anchoring-based uncertainty estimation for arbitrary predictors."""

__version__ = "0.1.0"
