"""Two particles in one dimension on a product grid.

Code paths are written against a particle index so the N-particle structure
stays visible, but only N = 2 is implemented.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classical import _arr
from .dynamics import SolverConfig, _d1_symbol, schrodinger_propagator
from .errors import DegenerateZero
from .grid import Grid1D, UnitSystem, derivative, integrate

N_PARTICLES = 2


def integrate2(f, grid1: Grid1D, grid2: Grid1D):
    return grid1.weights @ np.asarray(f) @ grid2.weights


@dataclass(frozen=True, eq=False)
class Amplitude2:
    grid1: Grid1D
    grid2: Grid1D
    values: np.ndarray = field(repr=False)
    masses: tuple = (1.0, 1.0)

    def __post_init__(self):
        arr = np.array(self.values, dtype=complex)
        if arr.shape != (self.grid1.n_points, self.grid2.n_points):
            raise ValueError("amplitude matrix does not match the grids")
        if not np.all(np.isfinite(arr)):
            raise ValueError("amplitude contains non-finite entries")
        if len(self.masses) != N_PARTICLES or min(self.masses) < 0:
            raise ValueError("need two non-negative masses")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))

    @classmethod
    def product(cls, psi1, psi2, masses=(1.0, 1.0)):
        return cls(psi1.grid, psi2.grid, np.outer(psi1.values, psi2.values), masses)

    def grid(self, j):
        return (self.grid1, self.grid2)[j - 1]

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(integrate2(self.density(), self.grid1, self.grid2))

    def normalized(self) -> "Amplitude2":
        return self._replace(self.values / np.sqrt(self.norm()))

    def exchanged(self) -> "Amplitude2":
        """Swap particle labels."""
        return Amplitude2(self.grid2, self.grid1, self.values.T,
                          (self.masses[1], self.masses[0]))

    def _replace(self, values):
        return Amplitude2(self.grid1, self.grid2, values, self.masses)


def mean_xj(psi2: Amplitude2, j: int) -> float:
    """Mean coordinate of particle j from the joint density."""
    if j not in (1, 2):
        raise IndexError(f"particle index {j} out of range")
    rho = psi2.density()
    marginal = rho @ psi2.grid2.weights if j == 1 else psi2.grid1.weights @ rho
    g = psi2.grid(j)
    return float(integrate(g.x * marginal, g) / integrate(marginal, g))


def symmetrize(psi2: Amplitude2, sign: int) -> Amplitude2:
    """(psi(x1, x2) + sign * psi(x2, x1)), renormalized."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if psi2.grid1 != psi2.grid2:
        raise ValueError("exchange needs identical grids")
    if psi2.masses[0] != psi2.masses[1]:
        raise ValueError("exchange is not a symmetry for unequal masses")
    v = psi2.values + sign * psi2.values.T
    norm = integrate2(np.abs(v) ** 2, psi2.grid1, psi2.grid2)
    if norm < 1e-12:
        raise DegenerateZero("(anti)symmetrized amplitude vanishes")
    return psi2._replace(v / np.sqrt(norm))


def schrodinger2_step(psi2: Amplitude2, cfg: SolverConfig, reverse: bool = False) -> Amplitude2:
    """Free two-particle Crank-Nicolson step, split by particle.

    Symmetric ordering: particle 1 then 2 for the first half step, 2 then 1
    for the second, each sub-step a one-particle Crank-Nicolson solve over
    dt/2 that acts on every column (or row) at once.
    """
    if min(psi2.masses) <= 0:
        raise ValueError("Schrodinger evolution needs positive masses")
    half = SolverConfig(cfg.dt / 2.0, 1, cfg.units, None, 1)
    p1 = schrodinger_propagator(psi2.grid1, half, reverse, psi2.masses[0])
    p2 = schrodinger_propagator(psi2.grid2, half, reverse, psi2.masses[1])
    v = psi2.values
    v = p1.step(v)
    v = p2.step(v.T).T
    v = p2.step(v.T).T
    v = p1.step(v)
    return psi2._replace(v)


def schrodinger2_evolve(psi2: Amplitude2, cfg: SolverConfig, sink=None) -> Amplitude2:
    for n in range(cfg.n_steps + 1):
        if sink is not None and n % cfg.snapshot_every == 0:
            sink(n, n * cfg.dt, psi2)
        if n < cfg.n_steps:
            psi2 = schrodinger2_step(psi2, cfg)
    return psi2


def hj_residual_n(S, dS_dt, masses, grid1: Grid1D, grid2: Grid1D) -> np.ndarray:
    """dS/dt + sum_j (dS/dx_j)^2 / (2 m_j) on the product grid."""
    S = _arr(S)
    grad1 = derivative(S.T, grid1).T
    grad2 = derivative(S, grid2)
    return _arr(dS_dt) + grad1 ** 2 / (2.0 * masses[0]) + grad2 ** 2 / (2.0 * masses[1])


def relativistic_invariant2(psi2: Amplitude2, dpsi_dt_parts, units: UnitSystem | None = None
                            ) -> float:
    """Sum over particles of int |d psi/dt_j|^2 / c^2 - |d psi/dx_j|^2.

    ``dpsi_dt_parts[j]`` is the derivative with respect to particle j's own
    time; the invariant is read as a separable sum over particles, so each
    particle's rest-mass term contributes m_j^2 c^2 / hbar^2 without cross
    terms.
    """
    units = units or UnitSystem()
    g1, g2 = psi2.grid1, psi2.grid2
    v = psi2.values
    grads = (derivative(v.T, g1).T, derivative(v, g2))
    total = 0.0
    for j in range(N_PARTICLES):
        dt_j = np.asarray(dpsi_dt_parts[j])
        total += integrate2(np.abs(dt_j) ** 2 / units.c ** 2 - np.abs(grads[j]) ** 2, g1, g2)
    return float(total)


def plane_wave_pair(grid1: Grid1D, grid2: Grid1D, k1: float, k2: float,
                    units: UnitSystem | None = None, masses=(1.0, 1.0)):
    """Product of positive-frequency plane waves and its per-particle time derivatives.

    Each frequency sits on the shell of the discrete derivative, so the
    invariant is reproduced to round-off rather than to stencil accuracy.
    """
    units = units or UnitSystem()
    omegas = []
    for g, k, m in ((grid1, k1, masses[0]), (grid2, k2, masses[1])):
        keff = _d1_symbol(g, k) if g.is_mode(k) else k
        omegas.append(np.sqrt(units.c ** 2 * keff ** 2 + (m * units.c ** 2 / units.hbar) ** 2))
    f1 = np.exp(1j * k1 * grid1.x) / np.sqrt(grid1.length)
    f2 = np.exp(1j * k2 * grid2.x) / np.sqrt(grid2.length)
    psi2 = Amplitude2(grid1, grid2, np.outer(f1, f2), masses)
    parts = (-1j * omegas[0] * psi2.values, -1j * omegas[1] * psi2.values)
    return psi2, parts


def rank_one_residual(psi2: Amplitude2) -> float:
    """Relative distance of the amplitude matrix from the nearest product state."""
    w1 = np.sqrt(psi2.grid1.weights)
    w2 = np.sqrt(psi2.grid2.weights)
    s = np.linalg.svd(w1[:, None] * psi2.values * w2[None, :], compute_uv=False)
    return float(np.sqrt(np.sum(s[1:] ** 2) / np.sum(s ** 2)))


def diagonal_max(psi2: Amplitude2) -> float:
    return float(np.max(np.abs(np.diagonal(psi2.values))))
