"""Numerical core: mesh, quadrature, assembly, solver, estimator and adaptive loop."""
