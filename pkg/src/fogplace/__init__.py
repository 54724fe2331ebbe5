"""Hierarchical fog topology, traffic forecasting and reservation-aware service placement."""

__version__ = "0.1.0"
