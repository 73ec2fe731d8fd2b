"""Budgeted asymptotic dimension, dynamic asymptotic dimension and amenability witnesses at desk scale."""

__version__ = "0.1.0"
