"""Adaptive finite elements for cathodic protection with nonlinear boundary conditions."""

__version__ = "0.1.0"
