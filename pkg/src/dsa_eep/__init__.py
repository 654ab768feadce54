"""Dynamic survival analysis for early event prediction."""

__version__ = "0.1.0"
