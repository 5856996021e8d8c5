"""Semiclassical phase extraction and Hamilton-Jacobi residuals.

The classical limit is probed numerically: evolve Gaussian packets, pull
out the action s1 = hbar * phase and measure how far it is from solving the
Hamilton-Jacobi equation on the bulk of the packet.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NodeEncountered
from .grid import Amplitude, Grid1D, RealField, UnitSystem, derivative, integrate
from .dynamics import SolverConfig, mean_position, schrodinger_propagator
from . import fixtures


@dataclass(frozen=True, eq=False)
class ActionField:
    S: RealField
    m0: float
    units: UnitSystem = field(default_factory=UnitSystem)

    def __post_init__(self):
        if not self.m0 > 0:
            raise ValueError("m0 must be positive")

    @property
    def grid(self):
        return self.S.grid


def _potential_terms(S, potentials):
    e = S.units.e_charge
    if potentials is None:
        return 0.0, 0.0
    return e * potentials.U.values, e * potentials.A.values


def _arr(f):
    return np.asarray(getattr(f, "values", f), dtype=float)


def hj_residual(S: ActionField, dS_dt, potentials=None) -> RealField:
    """dS/dt + e U + (dS/dx - e A)^2 / (2 m0), pointwise."""
    eU, eA = _potential_terms(S, potentials)
    grad = derivative(S.S.values, S.grid) - eA
    return RealField(S.grid, _arr(dS_dt) + eU + grad ** 2 / (2.0 * S.m0))


def relativistic_hj_residual(S: ActionField, dS_dt, potentials=None) -> RealField:
    """(dS/dx - eA)^2 + m0^2 c^2 - (dS/dt + eU - m0 c^2)^2 / c^2, pointwise.

    Sign chosen so that in the slow limit the result is close to
    2 m0 times ``hj_residual``.
    """
    c = S.units.c
    eU, eA = _potential_terms(S, potentials)
    grad = derivative(S.S.values, S.grid) - eA
    mc = S.m0 * c
    return RealField(S.grid, grad ** 2 + mc ** 2 - (_arr(dS_dt) + eU - mc * c) ** 2 / c ** 2)


def support_mask(rho, rel_threshold=1e-10):
    r = _arr(rho)
    return r > rel_threshold * r.max()


def semiclassical_extract(psi: Amplitude, units: UnitSystem | None = None,
                          rel_threshold: float = 1e-10):
    """Return (s1, s2) with psi = exp(i s1/hbar) exp(-s2/hbar).

    s1 is hbar times the phase unwrapped across the support (points with
    rho above ``rel_threshold * max rho``), held constant outside it;
    s2 = -(hbar/2) ln rho with rho floored at the smallest normal float.
    Raises NodeEncountered if rho dips below the threshold inside the support.
    """
    units = units or UnitSystem()
    hbar = units.hbar
    v = psi.values
    rho = np.abs(v) ** 2
    keep = support_mask(rho, rel_threshold)
    idx = np.flatnonzero(keep)
    lo, hi = idx[0], idx[-1]
    if not keep[lo:hi + 1].all():
        raise NodeEncountered("amplitude has a node inside its support")
    phase = np.empty(v.shape)
    phase[lo:hi + 1] = np.unwrap(np.angle(v[lo:hi + 1]))
    phase[:lo] = phase[lo]
    phase[hi + 1:] = phase[hi]
    s2 = -0.5 * hbar * np.log(np.maximum(rho, np.finfo(float).tiny))
    return RealField(psi.grid, hbar * phase), RealField(psi.grid, s2)


def weighted_bulk_mean(values, rho) -> float:
    """rho-weighted mean of |values| over the region where rho exceeds half its max."""
    rho = np.asarray(rho)
    bulk = rho > 0.5 * rho.max()
    w = rho[bulk]
    return float(np.sum(np.abs(np.asarray(values)[bulk]) * w) / np.sum(w))


class LocalizationRow(NamedTuple):
    sigma: float
    hbar: float
    max_mean_error: float
    hj_residual: float


def _packet_run(grid, sigma, p0, x0, cfg):
    """Evolve one free packet; return (max trajectory error, mean bulk HJ residual)."""
    units = cfg.units
    hbar, m = units.hbar, units.m0
    psi = fixtures.gaussian(grid, x0, sigma ** 2, p0 / hbar)
    prop = schrodinger_propagator(grid, cfg)
    prev, cur = None, psi.values.copy()
    max_err, residuals = 0.0, []
    for n in range(cfg.n_steps + 1):
        nxt = prop.step(cur) if n < cfg.n_steps else None
        if n % cfg.snapshot_every == 0:
            t = n * cfg.dt
            max_err = max(max_err, abs(mean_position(cur, grid) - (x0 + p0 * t / m)))
            if prev is not None and nxt is not None:
                amp = Amplitude(grid, cur)
                s1, _ = semiclassical_extract(amp, units)
                ds_dt = hbar * np.angle(nxt * np.conj(prev)) / (2.0 * cfg.dt)
                r = hj_residual(ActionField(s1, m, units), ds_dt)
                residuals.append(weighted_bulk_mean(r.values, np.abs(cur) ** 2))
        prev, cur = cur, nxt
    return max_err, float(np.mean(residuals))


def localization_study(sigma_list, p0: float, cfg: SolverConfig, grid: Grid1D,
                       hbar_list=None, x0: float = 0.0) -> list[LocalizationRow]:
    """Scan packet width (and optionally hbar) for free Gaussian packets.

    For each (hbar, sigma) the packet is evolved with the Crank-Nicolson
    solver; the row records the largest deviation of <x>(t) from the
    classical trajectory x0 + p0 t / m0 and the bulk-weighted Hamilton-Jacobi
    residual of the extracted action, averaged over interior snapshots. The
    residual is the quantum-potential term, so it scales like
    hbar^2 / (m0 sigma^2).
    """
    sigmas = [float(s) for s in sigma_list]
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigma_list must be strictly decreasing")
    hbars = [cfg.units.hbar] if hbar_list is None else [float(h) for h in hbar_list]
    rows = []
    for hbar in hbars:
        run_cfg = SolverConfig(cfg.dt, cfg.n_steps, cfg.units.with_hbar(hbar),
                               cfg.potentials, cfg.snapshot_every)
        for sigma in sigmas:
            err, res = _packet_run(grid, sigma, p0, x0, run_cfg)
            rows.append(LocalizationRow(sigma, hbar, err, res))
    return rows


class OrderRow(NamedTuple):
    p: float
    max_residual: float
    ratio: float


def free_relativistic_action(grid: Grid1D, p: float, t: float, m0: float,
                             units: UnitSystem | None = None):
    """S = p x - (sqrt(p^2 c^2 + m0^2 c^4) - m0 c^2) t and its time derivative."""
    units = units or UnitSystem()
    c = units.c
    kinetic = np.sqrt(p ** 2 * c ** 2 + m0 ** 2 * c ** 4) - m0 * c ** 2
    S = ActionField(RealField(grid, p * grid.x - kinetic * t), m0, units)
    return S, np.full(grid.n_points, -kinetic)


def free_nonrelativistic_action(grid: Grid1D, p: float, t: float, m0: float,
                                units: UnitSystem | None = None):
    """S = p x - p^2 t / (2 m0) and its time derivative."""
    units = units or UnitSystem()
    S = ActionField(RealField(grid, p * grid.x - p ** 2 * t / (2.0 * m0)), m0, units)
    return S, np.full(grid.n_points, -p ** 2 / (2.0 * m0))


def nonrelativistic_order_probe(grid: Grid1D, p0: float, m0: float = 1.0,
                                units: UnitSystem | None = None,
                                n_halvings: int = 3) -> list[OrderRow]:
    """Relativistic residual of the nonrelativistic free action under p halvings.

    The residual is -p^4 / (4 m0^2 c^2), so each halving should divide it
    by 16; ``ratio`` is previous / current (nan on the first row).
    """
    rows, prev = [], None
    p = float(p0)
    for _ in range(n_halvings + 1):
        S, dS = free_nonrelativistic_action(grid, p, 0.0, m0, units)
        r = float(np.max(np.abs(relativistic_hj_residual(S, dS).values)))
        rows.append(OrderRow(p, r, prev / r if prev is not None else float("nan")))
        prev = r
        p /= 2.0
    return rows
