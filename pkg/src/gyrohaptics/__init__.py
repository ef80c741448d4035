"""Impedance rendering with a scissored-pair CMG, and semantic-differential analysis."""

__version__ = "0.1.0"
