"""Adiabatic quantum transistor simulation and verification lab."""

__version__ = "0.1.0"
