"""Digitized counterdiabatic annealing: simulation, SPSA refinement of CD coefficients, QAOA comparison."""

__version__ = "0.1.0"
