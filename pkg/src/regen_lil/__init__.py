"""Simulation and numerical checks for regenerative compositions generated by subordinators."""

__version__ = "0.1.0"
