"""Microgrid topology detection from synchrophasor measurements."""

__version__ = "0.1.0"
