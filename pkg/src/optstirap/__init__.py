"""Optimised-pulse STIRAP simulation and DDP analysis toolkit."""

__version__ = "0.1.0"
