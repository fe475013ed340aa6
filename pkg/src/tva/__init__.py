"""Tactic-volatility-aware prediction and adaptation decisions."""

__version__ = "0.1.0"
