"""Round-synchronous simulator for black hole search in anonymous rings."""

__version__ = "0.1.0"
