"""Hybrid light-field super-resolution: a numpy autodiff engine, two networks and their fusion."""

__version__ = "0.1.0"
