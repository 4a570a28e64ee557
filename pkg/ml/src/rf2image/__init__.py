"""Conditional GAN translating RF array readings into reference photos."""

__version__ = "0.1.0"
