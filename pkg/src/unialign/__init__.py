"""Uni-directional Euler-alignment simulator with a modulus-of-continuity toolkit."""

__version__ = "0.1.0"
