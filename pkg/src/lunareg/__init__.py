"""Image registration toolkit for low/high resolution image pairs."""

__version__ = "0.1.0"
