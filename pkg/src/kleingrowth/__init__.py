"""Orbit growth of zonal Kleinian groups at the critical exponent."""

__version__ = "0.1.0"
