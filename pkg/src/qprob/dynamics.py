"""Time evolution for the Schrodinger, Klein-Gordon and 1+1 D Dirac equations.

Schrodinger and Dirac use Crank-Nicolson (unitary, unconditionally stable)
on banded Hamiltonians; Klein-Gordon uses velocity-Verlet leapfrog on the
three-point Laplacian. Vector potentials enter through link phases
exp(-i e/hbar * integral of A) on every off-diagonal coupling, which keeps
the discrete Hamiltonians Hermitian and gauge covariant.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BoundaryWarning, CFLViolation, CFLWarning
from .gauge import Potentials
from .grid import Amplitude, Grid1D, UnitSystem, derivative, integrate, second_derivative
from .prob import momentum_mean

CFL_LIMIT = 0.9
CFL_WARN = 10.0


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    n_steps: int
    units: UnitSystem = field(default_factory=UnitSystem)
    potentials: Optional[Potentials] = None
    snapshot_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1 or self.snapshot_every < 1:
            raise ValueError("n_steps and snapshot_every must be positive")


@dataclass(frozen=True, eq=False)
class Spinor2:
    grid: Grid1D
    upper: np.ndarray = field(repr=False)
    lower: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("upper", "lower"):
            arr = np.array(getattr(self, name), dtype=complex)
            if arr.shape != (self.grid.n_points,):
                raise ValueError(f"{name} component has the wrong length")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} component is not finite")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def components(self) -> np.ndarray:
        return np.stack([self.upper, self.lower])

    @classmethod
    def from_components(cls, grid, comps):
        return cls(grid, comps[0], comps[1])

    def density(self) -> np.ndarray:
        return np.abs(self.upper) ** 2 + np.abs(self.lower) ** 2

    def norm(self) -> float:
        return float(integrate(self.density(), self.grid))

    def normalized(self) -> "Spinor2":
        s = np.sqrt(self.norm())
        return Spinor2(self.grid, self.upper / s, self.lower / s)

    def conj(self) -> "Spinor2":
        return Spinor2(self.grid, np.conj(self.upper), np.conj(self.lower))


@dataclass(frozen=True, eq=False)
class KGState:
    psi: Amplitude
    dpsi_dt: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        arr = np.array(self.dpsi_dt, dtype=complex)
        if arr.shape != self.psi.values.shape or not np.all(np.isfinite(arr)):
            raise ValueError("dpsi_dt must be finite and match psi")
        arr.flags.writeable = False
        object.__setattr__(self, "dpsi_dt", arr)

    @property
    def grid(self):
        return self.psi.grid


class Snapshot(NamedTuple):
    step: int
    time: float
    grid: Grid1D
    values: np.ndarray


Sink = Callable[[Snapshot], None]


# banded operators

def _link_phases(grid, A, offset, units):
    """exp(-i e/hbar * integral of A from x_j to x_{j+offset}) for every j."""
    n = grid.n_points
    if A is None or not np.any(A):
        return np.ones(n)
    a = np.asarray(A, dtype=float)
    idx = np.arange(n)
    # trapezoid over the offset cells
    total = np.zeros(n)
    for m in range(abs(offset)):
        step = m if offset > 0 else -m
        lo = idx + step
        hi = lo + (1 if offset > 0 else -1)
        if grid.periodic:
            lo, hi = lo % n, hi % n
        else:
            lo, hi = np.clip(lo, 0, n - 1), np.clip(hi, 0, n - 1)
        total += 0.5 * (a[lo] + a[hi]) * np.sign(offset)
    return np.exp(-1j * units.e_charge * total * grid.dx / units.hbar)


def _banded(grid, coeffs, A, units):
    """Sparse matrix sum_m coeffs[m] * link(j, j+m) * delta_{j+m}."""
    n = grid.n_points
    rows, cols, vals = [], [], []
    idx = np.arange(n)
    for m, c in coeffs.items():
        link = _link_phases(grid, A, m, units) if m else np.ones(n)
        j = idx + m
        if grid.periodic:
            ok = np.ones(n, bool)
            j = j % n
        else:
            ok = (j >= 0) & (j < n)
        rows.append(idx[ok])
        cols.append(j[ok])
        vals.append(c * link[ok])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def _potential_arrays(cfg, grid):
    pot = cfg.potentials
    if pot is None:
        return np.zeros(grid.n_points), None
    if pot.grid != grid:
        raise ValueError("potentials live on a different grid")
    return pot.U.values, (pot.A.values if np.any(pot.A.values) else None)


def schrodinger_hamiltonian(grid: Grid1D, cfg: SolverConfig, mass=None) -> sp.csr_matrix:
    """(-i hbar d/dx - e A)^2 / 2m + e U with the five-point Laplacian."""
    u = cfg.units
    mass = u.m0 if mass is None else mass
    U, A = _potential_arrays(cfg, grid)
    h2 = grid.dx ** 2
    lap = {0: -30.0 / (12 * h2), 1: 16.0 / (12 * h2), -1: 16.0 / (12 * h2),
           2: -1.0 / (12 * h2), -2: -1.0 / (12 * h2)}
    kin = _banded(grid, lap, A, u) * (-u.hbar ** 2 / (2.0 * mass))
    return (kin + sp.diags(u.e_charge * U)).tocsr()


def dirac_hamiltonian(grid: Grid1D, cfg: SolverConfig) -> sp.csr_matrix:
    """c sigma_1 (p - e A) + sigma_3 m0 c^2 + e U on stacked (upper, lower)."""
    u = cfg.units
    U, A = _potential_arrays(cfg, grid)
    h = grid.dx
    d1 = {1: 8.0 / (12 * h), -1: -8.0 / (12 * h), 2: -1.0 / (12 * h), -2: 1.0 / (12 * h)}
    p = _banded(grid, d1, A, u) * (-1j * u.hbar)
    n = grid.n_points
    mc2 = u.m0 * u.c ** 2
    upper = sp.diags(mc2 + u.e_charge * U)
    lower = sp.diags(-mc2 + u.e_charge * U)
    return sp.bmat([[upper, u.c * p], [u.c * p, lower]]).tocsr()


class CrankNicolson:
    """Factorized Crank-Nicolson propagator for a fixed Hamiltonian.

    ``step`` accepts arrays whose first axis is the state vector, so a stack
    of columns can be advanced in one solve.
    """

    def __init__(self, H: sp.spmatrix, dt: float, hbar: float = 1.0, reverse=False):
        self.dt = -dt if reverse else dt
        n = H.shape[0]
        a = 0.5j * self.dt / hbar
        eye = sp.identity(n, dtype=complex, format="csc")
        self._lhs = spla.splu((eye + a * H).tocsc())
        self._rhs = (eye - a * H).tocsr()
        self.max_diag = float(np.max(np.abs(H.diagonal())))
        self.hbar = hbar

    def step(self, psi: np.ndarray) -> np.ndarray:
        return self._lhs.solve(self._rhs @ psi)

    def accuracy_ratio(self) -> float:
        return abs(self.dt) * self.max_diag / self.hbar


def _warn_accuracy(prop):
    ratio = prop.accuracy_ratio()
    if ratio > CFL_WARN:
        warnings.warn(f"dt * max|H_jj| / hbar = {ratio:.3g} > {CFL_WARN:g}; "
                      "Crank-Nicolson stays stable but phases will be inaccurate",
                      CFLWarning, stacklevel=3)


@lru_cache(maxsize=32)
def _schrodinger_prop(grid, cfg, reverse, mass=None):
    H = schrodinger_hamiltonian(grid, cfg, mass)
    return CrankNicolson(H, cfg.dt, cfg.units.hbar, reverse)


@lru_cache(maxsize=16)
def _dirac_prop(grid, cfg, reverse):
    return CrankNicolson(dirac_hamiltonian(grid, cfg), cfg.dt, cfg.units.hbar, reverse)


def schrodinger_propagator(grid, cfg, reverse=False, mass=None) -> CrankNicolson:
    prop = _schrodinger_prop(grid, cfg, reverse, mass)
    _warn_accuracy(prop)
    return prop


def schrodinger_step(psi: Amplitude, cfg: SolverConfig, reverse: bool = False) -> Amplitude:
    """One Crank-Nicolson step of i hbar psi_t = H psi (backwards if ``reverse``)."""
    prop = schrodinger_propagator(psi.grid, cfg, reverse)
    return Amplitude(psi.grid, prop.step(psi.values))


def _check_packet_margin(grid, values):
    if grid.periodic:
        return
    rho = np.abs(values) ** 2
    total = integrate(rho, grid)
    if total <= 0:
        return
    mu = integrate(grid.x * rho, grid) / total
    sigma = np.sqrt(max(integrate((grid.x - mu) ** 2 * rho, grid) / total, 0.0))
    if min(mu - grid.x_min, grid.x_max - mu) < 5.0 * sigma:
        warnings.warn("packet is within 5 sigma of a vanishing boundary; the "
                      "surface terms assumed to vanish no longer do", BoundaryWarning,
                      stacklevel=3)


def schrodinger_evolve(psi: Amplitude, cfg: SolverConfig, sink: Sink | None = None,
                       reverse: bool = False) -> Amplitude:
    """Run ``cfg.n_steps`` steps, emitting a snapshot every ``snapshot_every``."""
    prop = schrodinger_propagator(psi.grid, cfg, reverse)
    v = psi.values.copy()
    grid = psi.grid
    for n in range(cfg.n_steps + 1):
        if n % cfg.snapshot_every == 0:
            _check_packet_margin(grid, v)
            if sink is not None:
                sink(Snapshot(n, n * prop.dt, grid, v.copy()))
        if n < cfg.n_steps:
            v = prop.step(v)
    return Amplitude(grid, v)


def relax_ground_state(grid: Grid1D, cfg: SolverConfig, n_iter: int = 300,
                       tau: float = 1.0, initial: Amplitude | None = None) -> Amplitude:
    """Lowest eigenstate of the discrete Hamiltonian by implicit imaginary-time steps."""
    H = schrodinger_hamiltonian(grid, cfg)
    lu = spla.splu((sp.identity(grid.n_points, dtype=complex, format="csc")
                    + (tau / cfg.units.hbar) * H).tocsc())
    v = (initial.values if initial is not None
         else np.exp(-grid.x ** 2 / 2.0).astype(complex))
    for _ in range(n_iter):
        v = lu.solve(v)
        v /= np.sqrt(integrate(np.abs(v) ** 2, grid))
    # remove the arbitrary global phase
    v *= np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
    return Amplitude(grid, v)


# Dirac

def dirac_step(sp_: Spinor2, cfg: SolverConfig, reverse: bool = False) -> Spinor2:
    prop = _dirac_prop(sp_.grid, cfg, reverse)
    _warn_accuracy(prop)
    out = prop.step(np.concatenate([sp_.upper, sp_.lower]))
    n = sp_.grid.n_points
    return Spinor2(sp_.grid, out[:n], out[n:])


def dirac_evolve(sp_: Spinor2, cfg: SolverConfig, sink: Sink | None = None) -> Spinor2:
    prop = _dirac_prop(sp_.grid, cfg, False)
    _warn_accuracy(prop)
    grid, n = sp_.grid, sp_.grid.n_points
    v = np.concatenate([sp_.upper, sp_.lower])
    for k in range(cfg.n_steps + 1):
        if k % cfg.snapshot_every == 0 and sink is not None:
            sink(Snapshot(k, k * cfg.dt, grid, v.reshape(2, n).copy()))
        if k < cfg.n_steps:
            v = prop.step(v)
    return Spinor2(grid, v[:n], v[n:])


def dirac_time_derivative(sp_: Spinor2, cfg: SolverConfig) -> np.ndarray:
    """d psi/dt = -(i/hbar) H psi, shape (2, n)."""
    H = dirac_hamiltonian(sp_.grid, cfg)
    out = (-1j / cfg.units.hbar) * (H @ np.concatenate([sp_.upper, sp_.lower]))
    return out.reshape(2, sp_.grid.n_points)


def dirac_current(sp_: Spinor2, units: UnitSystem | None = None) -> np.ndarray:
    """Spatial current c psi^+ sigma_1 psi of the Dirac field."""
    units = units or UnitSystem()
    return 2.0 * units.c * np.real(np.conj(sp_.upper) * sp_.lower)


def _d1_symbol(grid, k):
    """Eigenvalue of the fourth-order central difference on exp(ikx), divided by i."""
    h = grid.dx
    return (8.0 * np.sin(k * h) - np.sin(2.0 * k * h)) / (6.0 * h)


def dirac_plane_wave(grid: Grid1D, k: float, units: UnitSystem | None = None,
                     branch: int = 1) -> Spinor2:
    """Normalized plane-wave eigen-spinor of the discrete free Dirac Hamiltonian."""
    units = units or UnitSystem()
    keff = _d1_symbol(grid, k) if grid.is_mode(k) else k
    mc2 = units.m0 * units.c ** 2
    h = np.array([[mc2, units.c * units.hbar * keff],
                  [units.c * units.hbar * keff, -mc2]])
    w, vecs = np.linalg.eigh(h)
    u = vecs[:, 1] if branch > 0 else vecs[:, 0]
    phase = np.exp(1j * k * grid.x)
    return Spinor2(grid, u[0] * phase, u[1] * phase).normalized()


# gamma-matrix representation: gamma0 = sigma_3, gamma1 = i sigma_2
GAMMA0 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
GAMMA1 = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)


def dirac_operator(comps: np.ndarray, omega: float, grid: Grid1D,
                   units: UnitSystem | None = None, mass_sign: int = 1) -> np.ndarray:
    """(gamma0/c) d/dt + gamma1 d/dx + mass_sign * i m0 c/hbar on exp(-i omega t) fields.

    ``mass_sign=-1`` gives the partner operator whose product with the
    ordinary one is the Klein-Gordon operator (up to sign).
    """
    units = units or UnitSystem()
    comps = np.asarray(comps, dtype=complex)
    dt_part = (-1j * omega / units.c) * np.einsum("ab,bn->an", GAMMA0, comps)
    dx_part = np.einsum("ab,bn->an", GAMMA1, derivative(comps, grid))
    return dt_part + dx_part + mass_sign * 1j * units.compton_wavenumber * comps


def klein_gordon_operator(comps: np.ndarray, omega: float, grid: Grid1D,
                          units: UnitSystem | None = None) -> np.ndarray:
    """(d^2/dx^2 - (1/c^2) d^2/dt^2 - (m0 c/hbar)^2) applied componentwise.

    The spatial second derivative is the composed first-derivative stencil
    so that it matches the Dirac factorization exactly.
    """
    units = units or UnitSystem()
    comps = np.asarray(comps, dtype=complex)
    return (derivative(derivative(comps, grid), grid)
            + (omega / units.c) ** 2 * comps - units.compton_wavenumber ** 2 * comps)


# Klein-Gordon

@numba.njit(cache=True)
def _kg_accel(psi, out, inv_h2c2, mass2, periodic):
    n = psi.shape[0]
    for j in range(1, n - 1):
        out[j] = inv_h2c2 * (psi[j - 1] - 2.0 * psi[j] + psi[j + 1]) - mass2 * psi[j]
    if periodic:
        out[0] = inv_h2c2 * (psi[n - 1] - 2.0 * psi[0] + psi[1]) - mass2 * psi[0]
        out[n - 1] = inv_h2c2 * (psi[n - 2] - 2.0 * psi[n - 1] + psi[0]) - mass2 * psi[n - 1]
    else:
        out[0] = inv_h2c2 * (-2.0 * psi[0] + psi[1]) - mass2 * psi[0]
        out[n - 1] = inv_h2c2 * (psi[n - 2] - 2.0 * psi[n - 1]) - mass2 * psi[n - 1]


@numba.njit(cache=True)
def _kg_leapfrog(psi, v, n_steps, dt, inv_h2c2, mass2, periodic):
    acc = np.empty_like(psi)
    _kg_accel(psi, acc, inv_h2c2, mass2, periodic)
    half = 0.5 * dt
    for _ in range(n_steps):
        for j in range(psi.shape[0]):
            v[j] += half * acc[j]
            psi[j] += dt * v[j]
        _kg_accel(psi, acc, inv_h2c2, mass2, periodic)
        for j in range(psi.shape[0]):
            v[j] += half * acc[j]


def _kg_coefficients(grid, cfg):
    u = cfg.units
    if cfg.potentials is not None and not cfg.potentials.is_free():
        raise ValueError("the Klein-Gordon solver handles free fields only")
    courant = u.c * cfg.dt / grid.dx
    if courant > CFL_LIMIT:
        raise CFLViolation(f"c dt / dx = {courant:.4g} exceeds {CFL_LIMIT}")
    inv_h2c2 = u.c ** 2 / grid.dx ** 2
    mass2 = u.rest_frequency ** 2
    # leapfrog needs dt^2 * (largest eigenvalue of the operator) <= 4
    if cfg.dt ** 2 * (4.0 * inv_h2c2 + mass2) > 4.0:
        raise CFLViolation("rest-mass frequency too large for leapfrog at this dt")
    return inv_h2c2, mass2


def _kg_apply(psi, grid, inv_h2c2, mass2):
    out = np.empty_like(psi)
    _kg_accel(psi, out, inv_h2c2, mass2, grid.periodic)
    return out


def klein_gordon_evolve(state: KGState, cfg: SolverConfig, sink: Sink | None = None,
                        n_steps: int | None = None) -> KGState:
    grid = state.grid
    inv_h2c2, mass2 = _kg_coefficients(grid, cfg)
    n_steps = cfg.n_steps if n_steps is None else n_steps
    psi = state.psi.values.copy()
    v = state.dpsi_dt.copy()
    done = 0
    every = cfg.snapshot_every if sink is not None else n_steps
    while True:
        if sink is not None and done % cfg.snapshot_every == 0:
            sink(Snapshot(done, state.t + done * cfg.dt, grid, psi.copy()))
        if done >= n_steps:
            break
        chunk = min(every, n_steps - done)
        _kg_leapfrog(psi, v, chunk, cfg.dt, inv_h2c2, mass2, grid.periodic)
        done += chunk
    return KGState(Amplitude(grid, psi), v, state.t + n_steps * cfg.dt)


def klein_gordon_step(state: KGState, cfg: SolverConfig) -> KGState:
    """One velocity-Verlet step of psi_tt = c^2 psi_xx - (m0 c^2/hbar)^2 psi."""
    return klein_gordon_evolve(state, cfg, n_steps=1)


def kg_energy(state: KGState, cfg: SolverConfig) -> float:
    """Discrete energy conserved by the leapfrog scheme.

    Uses the half-step velocity and the product of consecutive positions:
    |v_{n+1/2}|^2 / c^2 + Re <psi_{n+1}, (-D2 + mu^2) psi_n>, which tends to
    int |psi_t|^2/c^2 + |psi_x|^2 + mu^2 |psi|^2 as dt -> 0 and is invariant
    under the update up to round-off.
    """
    grid = state.grid
    inv_h2c2, mass2 = _kg_coefficients(grid, cfg)
    c2 = cfg.units.c ** 2
    psi = state.psi.values
    acc = _kg_apply(psi, grid, inv_h2c2, mass2)
    v_half = state.dpsi_dt + 0.5 * cfg.dt * acc
    psi_next = psi + cfg.dt * v_half
    kinetic = np.sum(np.abs(v_half) ** 2) / c2
    potential = np.real(np.vdot(psi_next, -acc)) / c2
    return float((kinetic + potential) * grid.dx)


def kg_energy_continuum(state: KGState, units: UnitSystem | None = None) -> float:
    units = units or UnitSystem()
    g = state.grid
    integrand = (np.abs(state.dpsi_dt) ** 2 / units.c ** 2
                 + np.abs(derivative(state.psi.values, g)) ** 2
                 + units.compton_wavenumber ** 2 * np.abs(state.psi.values) ** 2)
    return float(integrate(integrand, g))


def kg_plane_wave(grid: Grid1D, k: float, units: UnitSystem | None = None,
                  branch: int = 1) -> KGState:
    units = units or UnitSystem()
    omega = branch * np.sqrt(units.c ** 2 * k ** 2 + units.rest_frequency ** 2)
    psi = Amplitude(grid, np.exp(1j * k * grid.x)).normalized()
    return KGState(psi, -1j * omega * psi.values)


def kg_state_from_nonrelativistic(phi: Amplitude, units: UnitSystem | None = None) -> KGState:
    """KG initial data for the positive-energy branch built on a Schrodinger amplitude.

    psi = phi and psi_t = -i (m0 c^2/hbar) phi + (i hbar / 2 m0) phi''.
    """
    units = units or UnitSystem()
    dphi = (1j * units.hbar / (2.0 * units.m0)) * second_derivative(phi.values, phi.grid)
    return KGState(phi, -1j * units.rest_frequency * phi.values + dphi)


def relativistic_invariant_density(state: KGState, units: UnitSystem | None = None) -> float:
    """Integral of |psi_t|^2/c^2 - |psi_x|^2 at one instant."""
    units = units or UnitSystem()
    g = state.grid
    integrand = (np.abs(state.dpsi_dt) ** 2 / units.c ** 2
                 - np.abs(derivative(state.psi.values, g)) ** 2)
    return float(integrate(integrand, g))


def nonrelativistic_reduction(state: KGState, units: UnitSystem | None = None) -> Amplitude:
    """Strip the rest-mass phase: phi = exp(i m0 c^2 t / hbar) psi."""
    units = units or UnitSystem()
    return Amplitude(state.grid, np.exp(1j * units.rest_frequency * state.t) * state.psi.values)


# dispersion

class DispersionRow(NamedTuple):
    k: float
    omega_measured: float
    omega_theory: float
    rel_error: float


def _fit_frequency(times, phases):
    unwrapped = np.unwrap(phases)
    slope = np.polyfit(times, unwrapped, 1)[0]
    return -slope


def theory_frequency(solver: str, k: float, units: UnitSystem) -> float:
    if solver == "schrodinger":
        return units.hbar * k ** 2 / (2.0 * units.m0)
    return float(np.sqrt(units.c ** 2 * k ** 2 + units.rest_frequency ** 2))


def dispersion_scan(solver: str, k_list, grid: Grid1D, cfg: SolverConfig,
                    probe: int = 0, min_snapshots: int = 50) -> list[DispersionRow]:
    """Measure omega(k) by phase regression at one grid point.

    ``solver`` is ``"schrodinger"``, ``"klein_gordon"`` or ``"dirac"`` (positive
    branch). Each k must be a mode of the periodic grid.
    """
    solver = solver.lower()
    if solver not in ("schrodinger", "klein_gordon", "dirac"):
        raise ValueError(f"unknown solver {solver!r}")
    n_snap = cfg.n_steps // cfg.snapshot_every + 1
    if n_snap < min_snapshots:
        raise ValueError(f"need at least {min_snapshots} snapshots, config yields {n_snap}")
    units = cfg.units
    rows = []
    for k in k_list:
        k = float(k)
        if not grid.is_mode(k):
            raise ValueError(f"k = {k} is not a mode of the periodic grid")
        omega_th = theory_frequency(solver, k, units)
        if abs(omega_th) * cfg.dt * cfg.snapshot_every >= np.pi:
            raise ValueError("phase advances more than pi between snapshots; "
                             "reduce snapshot_every or dt")
        times, phases = [], []

        def sink(snap, times=times, phases=phases):
            vals = snap.values
            if vals.ndim == 2:
                comp = int(np.argmax(np.abs(vals[:, probe])))
                vals = vals[comp]
            times.append(snap.time)
            phases.append(np.angle(vals[probe]))

        if solver == "schrodinger":
            schrodinger_evolve(Amplitude(grid, np.exp(1j * k * grid.x)).normalized(), cfg, sink)
        elif solver == "klein_gordon":
            klein_gordon_evolve(kg_plane_wave(grid, k, units), cfg, sink)
        else:
            dirac_evolve(dirac_plane_wave(grid, k, units), cfg, sink)
        omega = _fit_frequency(np.array(times), np.array(phases))
        err = abs(omega - omega_th) / abs(omega_th) if omega_th else abs(omega - omega_th)
        rows.append(DispersionRow(k, float(omega), float(omega_th), float(err)))
    return rows


def mean_position(values: np.ndarray, grid: Grid1D) -> float:
    rho = np.abs(values) ** 2
    return float(integrate(grid.x * rho, grid) / integrate(rho, grid))


def ehrenfest_table(snapshots, units: UnitSystem | None = None):
    """Rows (time, <x>, <p>/m0, d<x>/dt) from a list of Schrodinger snapshots.

    The velocity column is a centred difference of <x> between neighbouring
    snapshots (one-sided at the ends).
    """
    units = units or UnitSystem()
    times = np.array([s.time for s in snapshots])
    xs = np.array([mean_position(s.values, s.grid) for s in snapshots])
    ps = np.array([units.hbar * momentum_mean(Amplitude(s.grid, s.values)) / units.m0
                   for s in snapshots])
    vel = np.gradient(xs, times) if len(times) > 1 else np.zeros_like(xs)
    return [tuple(map(float, row)) for row in zip(times, xs, ps, vel)]
