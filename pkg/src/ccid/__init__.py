"""Controllable confidence-based image denoising workbench."""

__version__ = "0.1.0"
