"""Replica migration planning and simulation for geo-distributed storage."""

__version__ = "0.1.0"
