"""Mine Java test-to-focal-method pairs, render focal context and grade generated tests."""

__version__ = "0.1.0"
