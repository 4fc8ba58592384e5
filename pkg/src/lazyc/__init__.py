"""Lazy-contract compiler and simulator."""

__version__ = "0.1.0"
