"""Desk-scale lab for major-feature-weakening training on
class-imbalanced data."""

__version__ = "0.1.0"
