"""Partial-regularity diagnostics for incompressible Navier-Stokes fields."""

__version__ = "0.1.0"
