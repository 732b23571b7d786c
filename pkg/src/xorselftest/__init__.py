"""Self-testing analysis for binary nonlocal XOR games."""

__version__ = "0.1.0"
