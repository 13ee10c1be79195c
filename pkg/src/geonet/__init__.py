"""Minimal triods on the ball and theta-networks on the sphere for near-standard metrics."""

__version__ = "0.1.0"
