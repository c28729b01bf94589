"""Desk-scale lab for universal projection directions."""

__version__ = "0.1.0"
