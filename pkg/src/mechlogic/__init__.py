"""Geometry, assembly and Brownian simulation of mechanical logic circuits."""

__version__ = "0.1.0"
