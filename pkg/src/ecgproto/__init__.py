"""Prototype-based multi-label ECG classification with case-based explanations."""

__version__ = "0.1.0"
