"""Attacking the GPS input of a learned UAV navigator, in simulation."""

__version__ = "0.1.0"
