"""Seeded simulations of collaborative mobile edge computing: edge video
caching with transcoding, computation offloading, and two-layer uplink
interference cancellation."""

__version__ = "0.1.0"
