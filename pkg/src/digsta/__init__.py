"""Digitized shortcut-to-adiabaticity compiler and two-qubit simulator."""

__version__ = "0.1.0"
