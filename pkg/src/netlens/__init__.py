"""Network-behavior profiling of mobile apps from captured HTTP traffic."""

__version__ = "0.1.0"
