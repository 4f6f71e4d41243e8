"""Corrosion-prevention decision support for heritage aircraft hangars."""

__version__ = "0.1.0"
