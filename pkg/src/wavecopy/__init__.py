"""Desk-scale simulator of wavefront copying between metasurface-lined rooms."""

__version__ = "0.1.0"
