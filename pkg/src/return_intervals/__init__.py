"""Volatility return-interval multiscaling analysis.

Builds normalized volatility from minute prices, extracts threshold
return intervals, fits the stretched-exponential scaling function and
the moment multiscaling exponent, and relates both to per-stock factors.
"""

__version__ = "0.1.0"
