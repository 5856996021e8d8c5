"""Uniform 1D grids, fields on them, quadrature and finite differences.

Everything downstream integrates and differentiates through this module, so
the stencils here set the accuracy floor of the whole package: composite
Simpson quadrature (exact for cubics) and fourth-order finite differences
with one-sided closures at vanishing boundaries.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError


class Boundary(str, enum.Enum):
    VANISHING = "vanishing"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_points: int
    boundary: Boundary = Boundary.VANISHING

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ValueError("n_points must be an integer >= 8")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def dx(self) -> float:
        if self.periodic:
            return self.length / self.n_points
        return self.length / (self.n_points - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_points)
        if not self.periodic:
            x[-1] = self.x_max
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights such that ``weights @ f`` integrates ``f``."""
        w = _quadrature_weights(self.n_points, self.dx, self.periodic)
        w.flags.writeable = False
        return w

    def mode(self, n: int) -> float:
        """Wavenumber of the n-th Fourier mode of a periodic grid."""
        return 2.0 * np.pi * n / self.length

    def is_mode(self, k: float, tol: float = 1e-9) -> bool:
        n = k * self.length / (2.0 * np.pi)
        return self.periodic and abs(n - round(n)) <= tol

    def boundary_values(self, f) -> np.ndarray:
        f = np.asarray(f)
        return np.array([f[0], f[-1]])


@dataclass(frozen=True)
class UnitSystem:
    """Physical constants; natural units by default."""

    hbar: float = 1.0
    c: float = 1.0
    m0: float = 1.0
    e_charge: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.m0 < 0:
            raise ValueError("m0 must be nonnegative")

    @property
    def rest_frequency(self) -> float:
        return self.m0 * self.c**2 / self.hbar

    @property
    def compton_wavenumber(self) -> float:
        """m0*c/hbar, the square root of the Klein-Gordon constant."""
        return self.m0 * self.c / self.hbar

    def with_hbar(self, hbar: float) -> "UnitSystem":
        return UnitSystem(hbar=hbar, c=self.c, m0=self.m0, e_charge=self.e_charge)


def _frozen(values, dtype, grid):
    arr = np.array(values, dtype=dtype)
    if arr.shape != (grid.n_points,):
        raise DimensionError(
            f"field has shape {arr.shape}, grid expects ({grid.n_points},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Amplitude:
    """Complex probability amplitude sampled on a grid."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, complex, self.grid))

    def norm(self) -> float:
        return integrate(np.abs(self.values) ** 2, self.grid).real

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "Amplitude":
        return Amplitude(self.grid, self.values / np.sqrt(self.norm()))

    def conj(self) -> "Amplitude":
        return Amplitude(self.grid, np.conj(self.values))


@dataclass(frozen=True, eq=False)
class RealField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, float, self.grid))


def _values(f, grid: Grid1D) -> np.ndarray:
    if isinstance(f, (Amplitude, RealField)):
        if f.grid != grid:
            raise DimensionError("field lives on a different grid")
        f = f.values
    f = np.asarray(f)
    if f.shape[-1] != grid.n_points:
        raise DimensionError(
            f"field has {f.shape[-1]} samples, grid has {grid.n_points}")
    return f


def _quadrature_weights(n, dx, periodic):
    if periodic:
        return np.full(n, dx)
    w = np.zeros(n)
    intervals = n - 1
    if intervals % 2 == 0:
        w[0:n:2] += 2.0
        w[1:n:2] += 4.0
        w[0] = w[-1] = 1.0
        return w * dx / 3.0
    # odd interval count: Simpson on the first n-3 points, 3/8 rule on the
    # last three intervals; both exact for cubics
    m = n - 3
    w[0:m:2] += 2.0
    w[1:m:2] += 4.0
    w[0] = 1.0
    w[m - 1] = 1.0
    w[:m] *= dx / 3.0
    w[m - 1:] += np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 * dx / 8.0
    return w


def integrate(f, grid: Grid1D):
    """Integrate a sampled field over the grid.

    Simpson's rule on vanishing grids (with a 3/8 closure when the interval
    count is odd), the rectangle rule on periodic grids where it is
    spectrally accurate. Integrates over the last axis, so stacks of fields
    are accepted.
    """
    f = _values(f, grid)
    return f @ grid.weights


def inner(u, v, grid: Grid1D):
    """(u, v) = integral of conj(u) * v."""
    return integrate(np.conj(_values(u, grid)) * _values(v, grid), grid)


# fourth-order stencils; boundary rows are one-sided closures
_D1_LEFT = np.array([
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
]) / 12.0
_D2_LEFT = np.array([
    [45.0, -154.0, 214.0, -156.0, 61.0, -10.0],
    [10.0, -15.0, -4.0, 14.0, -6.0, 1.0],
]) / 12.0


def derivative(f, grid: Grid1D) -> np.ndarray:
    """Fourth-order first derivative along the last axis."""
    f = _values(f, grid)
    h = grid.dx
    if grid.periodic:
        return (np.roll(f, 2, -1) - 8.0 * np.roll(f, 1, -1)
                + 8.0 * np.roll(f, -1, -1) - np.roll(f, -2, -1)) / (12.0 * h)
    out = np.empty(f.shape, dtype=np.result_type(f, float))
    out[..., 2:-2] = (f[..., :-4] - 8.0 * f[..., 1:-3]
                      + 8.0 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h)
    out[..., 0] = f[..., 0:5] @ _D1_LEFT[0] / h
    out[..., 1] = f[..., 0:5] @ _D1_LEFT[1] / h
    out[..., -1] = -(f[..., -1:-6:-1] @ _D1_LEFT[0]) / h
    out[..., -2] = -(f[..., -1:-6:-1] @ _D1_LEFT[1]) / h
    return out


def second_derivative(f, grid: Grid1D) -> np.ndarray:
    """Fourth-order second derivative along the last axis."""
    f = _values(f, grid)
    h2 = grid.dx ** 2
    if grid.periodic:
        return (-np.roll(f, 2, -1) + 16.0 * np.roll(f, 1, -1) - 30.0 * f
                + 16.0 * np.roll(f, -1, -1) - np.roll(f, -2, -1)) / (12.0 * h2)
    out = np.empty(f.shape, dtype=np.result_type(f, float))
    out[..., 2:-2] = (-f[..., :-4] + 16.0 * f[..., 1:-3] - 30.0 * f[..., 2:-2]
                      + 16.0 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h2)
    out[..., 0] = f[..., 0:6] @ _D2_LEFT[0] / h2
    out[..., 1] = f[..., 0:6] @ _D2_LEFT[1] / h2
    out[..., -1] = f[..., -1:-7:-1] @ _D2_LEFT[0] / h2
    out[..., -2] = f[..., -1:-7:-1] @ _D2_LEFT[1] / h2
    return out


def boundary_leak(psi, grid: Grid1D) -> float:
    """Largest |x * rho| at the two grid ends."""
    rho = np.abs(_values(psi, grid)) ** 2
    return float(max(abs(grid.x[0] * rho[0]), abs(grid.x[-1] * rho[-1])))
