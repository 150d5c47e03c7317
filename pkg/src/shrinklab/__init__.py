"""Exact and simulated non-hitting measures for shrinking-target systems."""

__version__ = "0.1.0"
