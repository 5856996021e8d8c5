"""Numerical checks of probability-amplitude relations.

Subpackages: ``grid`` (grids, quadrature, stencils), ``prob`` (densities,
currents, uncertainty relations), ``gauge``, ``dynamics`` (Schrodinger,
Klein-Gordon and Dirac solvers), ``classical`` (semiclassical limit),
``manybody`` (two particles) and the batch front end in ``cli``.
"""
from .grid import Amplitude, Boundary, Grid1D, RealField, UnitSystem

__version__ = "0.1.0"

__all__ = ["Amplitude", "Boundary", "Grid1D", "RealField", "UnitSystem", "__version__"]
