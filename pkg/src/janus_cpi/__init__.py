"""Proximity-measurement simulation and close-contact risk analysis."""

__version__ = "0.1.0"
