"""Level-1 limit order book laboratory."""

__version__ = "0.1.0"
