"""Secure K-user computation over an ideal quantum multiple-access channel."""

__version__ = "0.1.0"
