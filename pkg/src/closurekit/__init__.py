"""Closure-relation operators, their spectra and stability on discretized model problems."""

__version__ = "0.1.0"
