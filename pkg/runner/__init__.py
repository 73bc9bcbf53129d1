"""Command-line runner for the inclusion solver."""
__version__ = "0.1.0"
