"""Desk-scale laboratory for noise-induced phase transitions in cross-entropy benchmarking."""

__version__ = "0.1.0"
