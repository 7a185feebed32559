"""Slice-to-volume reconstruction with tri-planar / CP tensor fields and a small decoder."""

__version__ = "0.1.0"
