"""Performance prediction for configurable systems with binary and numeric options."""

__version__ = "0.1.0"
