"""Noisy [[4,2,2]] error-detection experiments on a star-topology device."""

__version__ = "0.1.0"
