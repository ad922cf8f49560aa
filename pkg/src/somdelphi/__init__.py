"""Fuzzy Delphi variable screening and self-organizing-map factor analysis."""

__version__ = "0.1.0"
