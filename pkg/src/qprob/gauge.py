"""Minimal coupling, the uncertainty relation with a real momentum shift
function, and charge conjugation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Amplitude, RealField, UnitSystem, derivative, integrate
from .prob import UncertaintyReport, _check_boundary


@dataclass(frozen=True, eq=False)
class Potentials:
    """Classical scalar potential U and vector potential component A."""

    U: RealField
    A: RealField

    def __post_init__(self):
        if self.U.grid != self.A.grid:
            raise ValueError("U and A must share a grid")

    @property
    def grid(self):
        return self.U.grid

    @classmethod
    def zero(cls, grid):
        z = np.zeros(grid.n_points)
        return cls(RealField(grid, z), RealField(grid, z))

    @classmethod
    def from_arrays(cls, grid, U=0.0, A=0.0):
        n = grid.n_points
        return cls(RealField(grid, np.broadcast_to(U, n)),
                   RealField(grid, np.broadcast_to(A, n)))

    def is_free(self) -> bool:
        return not (np.any(self.U.values) or np.any(self.A.values))


def covariant_momentum(psi: Amplitude, pot: Potentials,
                       units: UnitSystem | None = None) -> np.ndarray:
    """(-i hbar d/dx - e A) psi."""
    units = units or UnitSystem()
    v = psi.values
    return -1j * units.hbar * derivative(v, psi.grid) - units.e_charge * pot.A.values * v


def gauge_transform(psi: Amplitude, pot: Potentials, chi,
                    units: UnitSystem | None = None, dchi_dx=None):
    """Apply A -> A + dchi/dx, psi -> psi exp(i e chi / hbar).

    ``dchi_dx`` defaults to the grid derivative of ``chi``.
    """
    units = units or UnitSystem()
    chi = np.asarray(getattr(chi, "values", chi), dtype=float)
    if dchi_dx is None:
        dchi_dx = derivative(chi, psi.grid)
    new_psi = Amplitude(psi.grid, psi.values * np.exp(1j * units.e_charge * chi / units.hbar))
    new_pot = Potentials(pot.U, RealField(pot.grid, pot.A.values + dchi_dx))
    return new_psi, new_pot


def generalized_heisenberg(psi: Amplitude, f_x, check_boundary: bool = True
                           ) -> UncertaintyReport:
    """Position variance times the integral of |-i psi' - f_x psi|^2; bound 1/4.

    ``f_x`` is any real function (constant or sampled on the grid).
    """
    grid, v = psi.grid, psi.values
    if check_boundary:
        _check_boundary(grid, v)
    f = np.asarray(getattr(f_x, "values", f_x), dtype=float)
    rho = np.abs(v) ** 2
    a = integrate(grid.x * rho, grid)
    spread = integrate((grid.x - a) ** 2 * rho, grid)
    resid = -1j * derivative(v, grid) - f * v
    return UncertaintyReport.build(spread, integrate(np.abs(resid) ** 2, grid), 0.25,
                                   a=float(a))


def charge_conjugate(psi):
    """psi -> psi*, which flips the phase and every current.

    Works on amplitudes, decaying states, spinors and plain arrays.
    """
    if hasattr(psi, "conj"):
        return psi.conj()
    return np.conj(psi)
