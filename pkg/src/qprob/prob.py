"""Densities, phases, currents and the uncertainty relations built on them.

Bare identities are evaluated with hbar = 1; a ``UnitSystem`` rescales only
where a physical normalization is requested.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial.laguerre import laggauss

from .errors import AllMasked, BoundaryLeak, NotNormalized
from .grid import (Amplitude, RealField, UnitSystem, boundary_leak, derivative,
                   integrate)

BOUNDARY_TOL = 1e-8
NORM_TOL = 1e-6


@dataclass(frozen=True)
class UncertaintyReport:
    spread: float
    gradient_term: float
    product: float
    bound: float
    satisfied: bool
    saturation_gap: float
    extras: dict = field(default_factory=dict)

    @classmethod
    def build(cls, spread, gradient_term, bound, **extras):
        spread = float(spread)
        gradient_term = float(gradient_term)
        product = spread * gradient_term
        return cls(spread, gradient_term, product, bound,
                   product >= bound - 1e-9, product - bound, extras)


@dataclass(frozen=True, eq=False)
class Decomposition:
    rho: RealField
    s: RealField
    node_mask: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return np.sqrt(self.rho.values) * np.exp(1j * self.s.values)


@dataclass(frozen=True, eq=False)
class DecayingState:
    """psi(r, t) = exp(-i omega t - t / (2 tau)) psi(r) / sqrt(tau), t >= 0."""

    omega: float
    tau: float
    spatial: Amplitude

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.spatial.is_normalized(1e-9):
            raise NotNormalized("spatial amplitude must be normalized to 1e-9")

    @property
    def grid(self):
        return self.spatial.grid

    def temporal(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-1j * self.omega * t - t / (2.0 * self.tau)) / np.sqrt(self.tau)

    def evaluate(self, t) -> np.ndarray:
        """Samples of psi(x, t) with shape (len(t), n_points)."""
        return np.multiply.outer(self.temporal(np.atleast_1d(t)), self.spatial.values)

    def conj(self) -> "DecayingState":
        return DecayingState(-self.omega, self.tau, self.spatial.conj())


class KineticFisher(NamedTuple):
    kinetic: float
    fisher_scaled: float
    phase_term: float


def _amp(psi):
    return psi.grid, psi.values


def _check_normalized(rho: RealField, tol=NORM_TOL):
    total = integrate(rho.values, rho.grid)
    if abs(total - 1.0) > tol:
        raise NotNormalized(f"density integrates to {total!r}")


def _check_boundary(grid, values, value=None):
    leak = boundary_leak(values, grid)
    if leak > BOUNDARY_TOL:
        raise BoundaryLeak(
            f"|x rho| at the boundary is {leak:.3e} > {BOUNDARY_TOL:g}",
            value=value, leak=leak)


def born_density(psi: Amplitude) -> RealField:
    return RealField(psi.grid, psi.values.real ** 2 + psi.values.imag ** 2)


def decompose(psi: Amplitude, node_threshold: float = 1e-8) -> Decomposition:
    """Split psi into sqrt(rho) exp(i s).

    The phase is unwrapped left to right over the points where |psi| is at
    least ``node_threshold``; masked points get a phase interpolated from
    their unmasked neighbours so that ``s`` stays finite.
    """
    grid, psi_v = _amp(psi)
    rho = born_density(psi)
    mask = np.abs(psi_v) < node_threshold
    keep = ~mask
    if not keep.any():
        raise AllMasked("every grid point is below the node threshold")
    phase = np.unwrap(np.angle(psi_v[keep]))
    s = np.interp(grid.x, grid.x[keep], phase)
    s[keep] = phase
    return Decomposition(rho, RealField(grid, s), mask)


def mean_x(rho: RealField) -> float:
    _check_normalized(rho)
    return float(integrate(rho.grid.x * rho.values, rho.grid))


def variance_x(rho: RealField) -> float:
    mu = mean_x(rho)
    return float(integrate((rho.grid.x - mu) ** 2 * rho.values, rho.grid))


def fisher_x(rho: RealField, eps_rel: float = 1e-12) -> float:
    """Fisher information of the density, skipping points below eps_rel * max(rho)."""
    r = rho.values
    grad = derivative(r, rho.grid)
    keep = r >= eps_rel * r.max()
    integrand = np.zeros_like(r)
    integrand[keep] = grad[keep] ** 2 / r[keep]
    return float(integrate(integrand, rho.grid))


def position_gradient_identity(rho: RealField) -> float:
    """Integral of x * d(rho)/dx; -1 for boundary-clean normalized densities."""
    return float(integrate(rho.grid.x * derivative(rho.values, rho.grid), rho.grid))


def cramer_rao(rho: RealField) -> UncertaintyReport:
    _check_boundary(rho.grid, np.sqrt(np.maximum(rho.values, 0.0)))
    return UncertaintyReport.build(variance_x(rho), fisher_x(rho), 1.0)


def current_x(psi: Amplitude, units: UnitSystem | None = None,
              physical: bool = False) -> RealField:
    """Probability current (1/2i)(psi* psi' - psi psi*').

    With ``physical=True`` the bare current is multiplied by hbar/m0.
    """
    grid, v = _amp(psi)
    j = np.imag(np.conj(v) * derivative(v, grid))
    if physical:
        units = units or UnitSystem()
        j = j * (units.hbar / units.m0)
    return RealField(grid, j)


def commutator_expectation(psi: Amplitude, check_boundary: bool = True) -> complex:
    """Integral of (x psi)*(-i psi') - (-i psi')*(x psi); equals i."""
    grid, v = _amp(psi)
    xpsi = grid.x * v
    mom = -1j * derivative(v, grid)
    value = complex(integrate(np.conj(xpsi) * mom - np.conj(mom) * xpsi, grid))
    if check_boundary:
        _check_boundary(grid, v, value)
    return value


def momentum_mean(psi: Amplitude) -> float:
    """<-i d/dx>; real for boundary-clean amplitudes."""
    grid, v = _amp(psi)
    return float(integrate(np.conj(v) * (-1j) * derivative(v, grid), grid).real)


def heisenberg(psi: Amplitude, a="optimal", b="optimal",
               check_boundary: bool = True) -> UncertaintyReport:
    """Spread about ``a`` times the dispersion of -i d/dx about ``b``; bound 1/4.

    Passing ``"optimal"`` for either shift uses the minimizer: the mean
    position for ``a`` and the mean of -i d/dx for ``b``.
    """
    grid, v = _amp(psi)
    if check_boundary:
        _check_boundary(grid, v)
    rho = v.real ** 2 + v.imag ** 2
    if isinstance(a, str):
        a = float(integrate(grid.x * rho, grid))
    if isinstance(b, str):
        b = momentum_mean(psi)
    spread = integrate((grid.x - a) ** 2 * rho, grid)
    resid = -1j * derivative(v, grid) - b * v
    gradient = integrate(np.abs(resid) ** 2, grid)
    return UncertaintyReport.build(spread, gradient, 0.25, a=float(a), b=float(b))


def kinetic_fisher_check(psi: Amplitude, units: UnitSystem | None = None,
                         eps_rel: float = 1e-12) -> KineticFisher:
    """Kinetic energy against the Fisher information of |psi|^2.

    kinetic = (hbar^2/2m) int |psi'|^2, fisher_scaled = (hbar^2/8m) * Fisher,
    phase_term = (hbar^2/2m) int rho (ds/dx)^2. For real psi the first two
    agree; in general kinetic = fisher_scaled + phase_term.
    """
    units = units or UnitSystem()
    grid, v = _amp(psi)
    scale = units.hbar ** 2 / (2.0 * units.m0)
    dpsi = derivative(v, grid)
    kinetic = scale * integrate(np.abs(dpsi) ** 2, grid)
    rho = born_density(psi)
    fisher_scaled = scale / 4.0 * fisher_x(rho, eps_rel)
    # rho (ds/dx)^2 = j^2 / rho, no unwrapping needed
    j = np.imag(np.conj(v) * dpsi)
    r = rho.values
    keep = r >= eps_rel * r.max()
    integrand = np.zeros_like(r)
    integrand[keep] = j[keep] ** 2 / r[keep]
    phase_term = scale * integrate(integrand, grid)
    return KineticFisher(float(kinetic), float(fisher_scaled), float(phase_term))


def time_current_total(psi_t, dpsi_dt) -> float:
    """Integral of Re[psi* i dpsi/dt]; positive for the particle branch.

    Accepts amplitudes, or arrays whose leading axis holds spinor components.
    """
    grid = psi_t.grid
    v = np.asarray(getattr(psi_t, "components", getattr(psi_t, "values", psi_t)))
    dv = np.asarray(getattr(dpsi_dt, "components", getattr(dpsi_dt, "values", dpsi_dt)))
    density = np.real(np.conj(v) * 1j * dv)
    if density.ndim > 1:
        density = density.sum(axis=0)
    return float(integrate(density, grid))


# decaying-state time machinery

def time_energy(ds: DecayingState) -> UncertaintyReport:
    """Closed-form time/frequency uncertainty of an exponentially decaying state.

    Mean square time 2 tau^2, optimal frequency shift d = omega and
    frequency dispersion 1/(4 tau^2); the spatial factor contributes its norm.
    """
    norm = ds.spatial.norm()
    t2 = 2.0 * ds.tau ** 2 * norm
    dispersion = norm / (4.0 * ds.tau ** 2)
    return UncertaintyReport.build(t2, dispersion, 0.25, d=float(ds.omega),
                                   method="closed-form")


def _time_samples(ds, n_nodes, h_rel):
    u, w = laggauss(n_nodes)
    t = ds.tau * u
    # weights for integral over [0, inf) of g(t) dt, with exp(-u) folded back in
    wt = ds.tau * w * np.exp(u)
    h = h_rel * ds.tau
    psi = ds.evaluate(t)
    # fourth-order central difference in time
    dpsi = (ds.evaluate(t - 2 * h) - 8.0 * ds.evaluate(t - h)
            + 8.0 * ds.evaluate(t + h) - ds.evaluate(t + 2 * h)) / (12.0 * h)
    return t, wt, psi, dpsi


def _spacetime_integral(ds, integrand, wt):
    return wt @ integrate(integrand, ds.grid)


def time_energy_numeric(ds: DecayingState, n_nodes: int = 48,
                        h_rel: float = 1e-3) -> UncertaintyReport:
    """Cross-check of ``time_energy`` by quadrature.

    Time integrals use Gauss-Laguerre nodes scaled by tau, the time
    derivative a fourth-order difference of the sampled amplitude, and the
    spatial integrals the grid quadrature.
    """
    t, wt, psi, dpsi = _time_samples(ds, n_nodes, h_rel)
    rho = np.abs(psi) ** 2
    t2 = _spacetime_integral(ds, (t ** 2)[:, None] * rho, wt)
    d = _spacetime_integral(ds, np.conj(psi) * 1j * dpsi, wt).real
    dispersion = _spacetime_integral(ds, np.abs(1j * dpsi - d * psi) ** 2, wt)
    return UncertaintyReport.build(t2.real, dispersion.real, 0.25, d=float(d),
                                   method="quadrature")


def time_commutator(ds: DecayingState, shift=0.0, n_nodes: int = 48,
                    h_rel: float = 1e-3) -> complex:
    """Integral of (E psi)* t psi - (t psi)* (E psi) with E = i d/dt - shift.

    ``shift`` is a real constant or a real spatial profile. The result is i
    for every real shift; the shift terms cancel pairwise.
    """
    t, wt, psi, dpsi = _time_samples(ds, n_nodes, h_rel)
    shift = np.asarray(getattr(shift, "values", shift), dtype=float)
    e_psi = 1j * dpsi - shift * psi
    tpsi = t[:, None] * psi
    return complex(_spacetime_integral(ds, np.conj(e_psi) * tpsi - np.conj(tpsi) * e_psi, wt))
