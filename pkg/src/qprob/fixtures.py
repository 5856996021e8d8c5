"""Named initial states used by tests, the verification suite and the CLI.

Gaussians use psi ~ exp(-(x - x0)^2 / (4 v)) exp(i k0 x), so the position
variance of |psi|^2 is exactly ``v``.
"""
from __future__ import annotations

import numpy as np

from .grid import Amplitude, Grid1D


def _normalized(grid, values):
    return Amplitude(grid, values).normalized()


def gaussian(grid: Grid1D, x0=0.0, variance=1.0, k0=0.0) -> Amplitude:
    x = grid.x
    return _normalized(grid, np.exp(-(x - x0) ** 2 / (4.0 * variance) + 1j * k0 * x))


def gaussian_density(x, x0=0.0, variance=1.0):
    return np.exp(-(x - x0) ** 2 / (2.0 * variance)) / np.sqrt(2.0 * np.pi * variance)


def mixture(grid: Grid1D, centers, variances, weights=None, k0=0.0) -> Amplitude:
    """Amplitude sqrt(rho) for a Gaussian-mixture density rho."""
    centers = np.atleast_1d(centers)
    variances = np.broadcast_to(variances, centers.shape)
    if weights is None:
        weights = np.full(centers.shape, 1.0 / centers.size)
    rho = sum(w * gaussian_density(grid.x, c, v)
              for c, v, w in zip(centers, variances, weights))
    return _normalized(grid, np.sqrt(rho) * np.exp(1j * k0 * grid.x))


def bump(grid: Grid1D, width=1.0, power=4, x0=0.0, k0=0.0) -> Amplitude:
    """Flat-topped smooth bump, rho ~ exp(-|(x - x0)/width|^power)."""
    x = grid.x
    rho = np.exp(-np.abs((x - x0) / width) ** power)
    return _normalized(grid, np.sqrt(rho) * np.exp(1j * k0 * x))


def plane_wave(grid: Grid1D, k) -> Amplitude:
    return _normalized(grid, np.exp(1j * k * grid.x))


def odd_state(grid: Grid1D, variance=1.0, x0=0.0) -> Amplitude:
    """First excited oscillator-like state with a single node at x0."""
    x = grid.x - x0
    return _normalized(grid, x * np.exp(-x ** 2 / (4.0 * variance)))


def truncated_gaussian(grid: Grid1D, variance=None) -> Amplitude:
    """Gaussian too wide for the grid; violates the vanishing-boundary assumption."""
    if variance is None:
        variance = (0.25 * grid.length) ** 2
    return gaussian(grid, 0.5 * (grid.x_min + grid.x_max), variance)


def smooth_random_function(grid: Grid1D, rng, n_modes=4, amplitude=1.0, scale=None):
    """Real smooth random function built from a few low-frequency sinusoids."""
    if scale is None:
        scale = grid.length
    ks = 2.0 * np.pi * rng.integers(1, 4, size=n_modes) / scale
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
    amps = rng.normal(0.0, amplitude / np.sqrt(n_modes), size=n_modes)
    x = grid.x
    return sum(a * np.sin(k * x + p) for a, k, p in zip(amps, ks, phases))


def random_phase_gaussian(grid: Grid1D, rng=None, x0=0.0, variance=1.0, k0=0.0,
                          amplitude=1.0, n_modes=4) -> Amplitude:
    """Gaussian modulus with a smooth random phase; the density stays Gaussian."""
    if rng is None:
        rng = np.random.default_rng(0)
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    base = gaussian(grid, x0, variance, k0)
    phase = smooth_random_function(grid, rng, n_modes, amplitude, scale=16.0 * np.sqrt(variance))
    return _normalized(grid, base.values * np.exp(1j * phase))


REGISTRY = {
    "random_phase_gaussian": random_phase_gaussian,
    "gaussian": gaussian,
    "mixture": mixture,
    "bump": bump,
    "plane_wave": plane_wave,
    "odd_state": odd_state,
    "truncated_gaussian": truncated_gaussian,
}


def build(name: str, grid: Grid1D, **params) -> Amplitude:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {sorted(REGISTRY)}") from None
    return factory(grid, **params)
