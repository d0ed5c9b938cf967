"""Splitting-up schemes for differential equations driven by rough signals."""
__version__ = "0.1.0"
