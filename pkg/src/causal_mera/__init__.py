"""MERA as causality-constrained discrete quantum dynamics."""

__version__ = "0.1.0"
