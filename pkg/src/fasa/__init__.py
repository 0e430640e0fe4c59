"""Forced-alignment dataset construction toolkit."""

__version__ = "0.1.0"
