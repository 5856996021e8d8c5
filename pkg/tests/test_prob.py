import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qprob import fixtures
from qprob.errors import AllMasked, BoundaryLeak, NotNormalized
from qprob.grid import Amplitude, Boundary, Grid1D, RealField, UnitSystem, integrate
from qprob.prob import (DecayingState, born_density, commutator_expectation, cramer_rao,
                        current_x, decompose, fisher_x, heisenberg, kinetic_fisher_check,
                        mean_x, momentum_mean, position_gradient_identity, time_commutator,
                        time_current_total, time_energy, time_energy_numeric, variance_x)


def clean_fixtures(grid):
    return {
        "gaussian": fixtures.gaussian(grid, 0.0, 1.0),
        "gaussian_shifted": fixtures.gaussian(grid, 1.5, 0.6),
        "gaussian_boosted": fixtures.gaussian(grid, -1.0, 2.0, 1.0),
        "mixture": fixtures.mixture(grid, [-3.0, 3.0], [1.0, 1.0]),
        "bump": fixtures.bump(grid, 2.0, 4, 0.0, 0.5),
        "odd": fixtures.odd_state(grid, 1.0),
        "random_phase": fixtures.random_phase_gaussian(grid, np.random.default_rng(3)),
    }


class TestBornAndDecompose:
    def test_plane_wave_density(self):
        g = Grid1D(0, 4.0, 64, Boundary.PERIODIC)
        psi = Amplitude(g, np.exp(2j * np.pi * g.x) / 2.0)
        assert np.allclose(born_density(psi).values, 0.25, atol=1e-15)

    def test_gaussian_variance_convention(self, grid):
        rho = born_density(fixtures.gaussian(grid, 0.0, 1.7))
        assert variance_x(rho) == pytest.approx(1.7, abs=1e-8)

    def test_global_phase_same_density(self, grid):
        psi = fixtures.gaussian(grid, 0.3, 1.0, 0.4)
        rotated = Amplitude(grid, psi.values * np.exp(0.7j))
        assert np.allclose(born_density(rotated).values, born_density(psi).values,
                           rtol=1e-12, atol=1e-300)

    def test_linear_phase(self, grid):
        psi = fixtures.gaussian(grid, 0.0, 1.0, 1.3)
        dec = decompose(psi)
        keep = ~dec.node_mask
        fit = np.polyfit(grid.x[keep], dec.s.values[keep], 1)
        assert fit[0] == pytest.approx(1.3, abs=1e-9)
        recon = dec.reconstruct()[keep]
        assert np.max(np.abs(recon - psi.values[keep]) / np.abs(psi.values[keep])) <= 1e-9

    def test_real_positive_has_zero_phase(self, grid):
        dec = decompose(fixtures.gaussian(grid))
        assert np.max(np.abs(dec.s.values)) == 0.0

    def test_node(self):
        g = Grid1D(-10, 10, 2000)  # even count: no grid point on the node
        dec = decompose(fixtures.odd_state(g, 1.0), node_threshold=1e-2)
        masked = g.x[dec.node_mask]
        assert np.any(np.abs(masked) < 0.01)
        left, right = dec.s.values[(g.x < -0.5) & (g.x > -5)], dec.s.values[(g.x > 0.5) & (g.x < 5)]
        assert np.ptp(left) < 1e-12 and np.ptp(right) < 1e-12
        assert abs(abs(right[0] - left[0]) - np.pi) < 1e-12

    def test_all_masked(self):
        g = Grid1D(0, 1, 16)
        with pytest.raises(AllMasked):
            decompose(Amplitude(g, np.full(16, 1e-12)))


class TestMoments:
    def test_symmetric_mean(self, grid):
        assert mean_x(born_density(fixtures.gaussian(grid, 2.5, 1.0))) == pytest.approx(2.5, abs=1e-9)

    def test_uniform(self):
        g = Grid1D(0, 1, 101)
        rho = RealField(g, np.ones(101))
        assert mean_x(rho) == pytest.approx(0.5, abs=1e-14)
        assert variance_x(rho) == pytest.approx(1 / 12, abs=1e-14)

    def test_not_normalized(self, grid):
        rho = RealField(grid, 2 * born_density(fixtures.gaussian(grid)).values)
        with pytest.raises(NotNormalized):
            mean_x(rho)

    @pytest.mark.parametrize("v", [0.5, 1.0, 3.0])
    def test_gaussian_fisher(self, grid, v):
        assert fisher_x(born_density(fixtures.gaussian(grid, 0.0, v))) == pytest.approx(1 / v, abs=1e-6)

    def test_fisher_translation(self, grid):
        a = fisher_x(born_density(fixtures.mixture(grid, [-1, 2], [0.5, 1.0])))
        b = fisher_x(born_density(fixtures.mixture(grid, [-1.4, 1.6], [0.5, 1.0])))
        assert a == pytest.approx(b, rel=1e-9)

    def test_fisher_mixture_refined(self):
        coarse = Grid1D(-20, 20, 2001)
        fine = Grid1D(-20, 20, 16001)
        args = ([-2.0, 2.0], [1.0, 0.5])
        fc = fisher_x(born_density(fixtures.mixture(coarse, *args)))
        ff = fisher_x(born_density(fixtures.mixture(fine, *args)))
        assert abs(fc - ff) <= 1e-5

    def test_position_gradient_identity(self, grid):
        for psi in clean_fixtures(grid).values():
            assert position_gradient_identity(born_density(psi)) == pytest.approx(-1.0, abs=1e-6)


class TestCramerRao:
    def test_gaussian_saturates(self, grid):
        for v in (0.3, 1.0, 4.0):
            r = cramer_rao(born_density(fixtures.gaussian(grid, 0.5, v)))
            assert abs(r.saturation_gap) < 1e-5 and r.satisfied

    def test_bump_strict(self, grid):
        r = cramer_rao(born_density(fixtures.bump(grid, 2.0)))
        assert r.product > 1.0 + 1e-3

    def test_mixture_against_refined(self):
        def product(n):
            g = Grid1D(-20, 20, n)
            return cramer_rao(born_density(fixtures.mixture(g, [-3.0, 3.0], [1.0, 1.0]))).product
        coarse, fine = product(2001), product(16001)
        assert coarse > 5.0
        assert abs(coarse - fine) / fine <= 1e-4

    def test_report_fields(self, grid):
        r = cramer_rao(born_density(fixtures.bump(grid, 1.0)))
        assert r.product == pytest.approx(r.spread * r.gradient_term)
        assert r.bound == 1.0

    def test_leak(self):
        g = Grid1D(-4, 4, 801)
        with pytest.raises(BoundaryLeak):
            cramer_rao(born_density(fixtures.truncated_gaussian(g)))

    @settings(max_examples=30, deadline=None)
    @given(c1=st.floats(-4, 4), c2=st.floats(-4, 4), v1=st.floats(0.3, 2.0), v2=st.floats(0.3, 2.0),
           w=st.floats(0.05, 0.95))
    def test_property_mixtures(self, c1, c2, v1, v2, w):
        g = Grid1D(-20, 20, 2001)
        psi = fixtures.mixture(g, [c1, c2], [v1, v2], [w, 1 - w])
        assert cramer_rao(born_density(psi)).product >= 1 - 1e-6


class TestCurrent:
    def test_plane_wave(self):
        L = 2 * np.pi
        g = Grid1D(0, L, 512, Boundary.PERIODIC)
        psi = Amplitude(g, np.exp(3j * g.x) / np.sqrt(L))
        assert np.allclose(current_x(psi).values, 3 / L, rtol=1e-6)

    def test_real(self, grid):
        assert np.max(np.abs(current_x(fixtures.gaussian(grid)).values)) == 0.0

    def test_conjugate_flips_exactly(self, grid):
        psi = fixtures.random_phase_gaussian(grid, np.random.default_rng(1))
        assert np.array_equal(current_x(psi.conj()).values, -current_x(psi).values)

    def test_physical_scaling(self, grid):
        psi = fixtures.gaussian(grid, 0, 1, 1.0)
        u = UnitSystem(hbar=2.0, m0=4.0)
        assert np.allclose(current_x(psi, u, physical=True).values, 0.5 * current_x(psi).values)


class TestCommutator:
    @pytest.mark.parametrize("name", ["gaussian", "gaussian_shifted", "gaussian_boosted",
                                      "mixture", "bump", "odd", "random_phase"])
    def test_identity(self, grid, name):
        z = commutator_expectation(clean_fixtures(grid)[name])
        assert abs(z - 1j) <= 1e-6

    def test_truncated(self):
        g = Grid1D(-4, 4, 801)
        with pytest.raises(BoundaryLeak) as info:
            commutator_expectation(fixtures.truncated_gaussian(g))
        assert abs(info.value.value - 1j) > 1e-3


class TestHeisenberg:
    def test_gaussian(self, grid):
        r = heisenberg(fixtures.gaussian(grid, 0.0, 1.0))
        assert r.product == pytest.approx(0.25, abs=1e-5)

    def test_boosted(self, grid):
        r = heisenberg(fixtures.gaussian(grid, 0.0, 1.0, 0.8))
        assert r.product == pytest.approx(0.25, abs=1e-5)
        assert r.extras["b"] == pytest.approx(0.8, abs=1e-6)

    def test_optimal_is_minimum(self, grid):
        psi = fixtures.bump(grid, 2.0, 4, 0.3, 0.5)
        best = heisenberg(psi).product
        for a, b in [(0.0, 0.0), (1.0, 0.5), (0.3, -1.0)]:
            assert heisenberg(psi, a, b).product >= best

    def test_all_fixtures_bounded(self, grid):
        for psi in clean_fixtures(grid).values():
            assert heisenberg(psi).product >= 0.25 - 1e-6

    def test_translation_and_boost_invariance(self):
        # the deviation is stencil error falling as dx^4; 4e-7 at n=2001, 1e-9 at n=8001
        grid = Grid1D(-20, 20, 8001)
        base = heisenberg(fixtures.mixture(grid, [-2, 2], [1.0, 0.5])).product
        moved = heisenberg(fixtures.mixture(grid, [-1, 3], [1.0, 0.5])).product
        boosted = heisenberg(fixtures.mixture(grid, [-2, 2], [1.0, 0.5], k0=0.7)).product
        assert abs(moved - base) <= 1e-8
        assert abs(boosted - base) <= 1e-8

    @pytest.mark.parametrize("alpha", [0.3, 1.1, np.pi])
    def test_global_phase(self, grid, alpha):
        psi = fixtures.random_phase_gaussian(grid, np.random.default_rng(2))
        rot = Amplitude(grid, psi.values * np.exp(1j * alpha))
        assert heisenberg(rot).product == pytest.approx(heisenberg(psi).product, abs=1e-12)
        assert fisher_x(born_density(rot)) == pytest.approx(fisher_x(born_density(psi)), abs=1e-12)
        assert np.allclose(current_x(rot).values, current_x(psi).values, atol=1e-12)


class TestKineticFisher:
    def test_real(self, grid):
        kf = kinetic_fisher_check(fixtures.mixture(grid, [-2, 2], [1.0, 0.5]))
        assert abs(kf.kinetic - kf.fisher_scaled) / kf.kinetic <= 1e-6
        assert kf.phase_term == 0.0

    def test_boost(self, grid):
        k0 = 0.9
        u = UnitSystem(hbar=1.3, m0=0.7)
        kf = kinetic_fisher_check(fixtures.gaussian(grid, 0.0, 1.0, k0), u)
        expected = u.hbar ** 2 / (2 * u.m0) * k0 ** 2
        assert abs(kf.kinetic - kf.fisher_scaled - expected) <= 1e-6 * kf.kinetic
        assert kf.phase_term == pytest.approx(expected, rel=1e-6)

    def test_plane_wave(self):
        g = Grid1D(0, 2 * np.pi, 512, Boundary.PERIODIC)
        kf = kinetic_fisher_check(fixtures.plane_wave(g, 2.0))
        assert kf.fisher_scaled <= 1e-20
        assert kf.kinetic == pytest.approx(2.0, rel=1e-7)


class TestTimeEnergy:
    @pytest.mark.parametrize("omega,tau", [(1, 1), (5, 0.2), (0.3, 7)])
    def test_closed_form(self, grid, omega, tau):
        r = time_energy(DecayingState(omega, tau, fixtures.gaussian(grid)))
        assert r.spread == pytest.approx(2 * tau ** 2, rel=1e-9)
        assert r.gradient_term == pytest.approx(1 / (4 * tau ** 2), rel=1e-9)
        assert r.extras["d"] == omega
        assert r.product == pytest.approx(0.5, rel=1e-9)

    @pytest.mark.parametrize("omega,tau", [(1, 1), (5, 0.2), (0.3, 7)])
    def test_numeric(self, grid, omega, tau):
        ds = DecayingState(omega, tau, fixtures.gaussian(grid))
        exact, num = time_energy(ds), time_energy_numeric(ds)
        assert abs(num.spread - exact.spread) <= 1e-10 * exact.spread
        assert abs(num.gradient_term - exact.gradient_term) <= 1e-10 * exact.gradient_term
        assert abs(num.extras["d"] - omega) <= 1e-10 * max(1, omega)

    def test_validation(self, grid):
        with pytest.raises(ValueError):
            DecayingState(1.0, 0.0, fixtures.gaussian(grid))
        with pytest.raises(NotNormalized):
            DecayingState(1.0, 1.0, Amplitude(grid, 2 * fixtures.gaussian(grid).values))

    @pytest.mark.parametrize("shift", [0.0, 0.7, -2.0])
    def test_time_commutator(self, grid, shift):
        ds = DecayingState(2.0, 0.5, fixtures.gaussian(grid))
        assert abs(time_commutator(ds, shift) - 1j) < 1e-8
        assert abs(time_commutator(ds.conj(), -shift) - 1j) < 1e-8

    def test_time_current_sign(self, grid):
        phi = fixtures.gaussian(grid)
        omega = 1.7
        assert time_current_total(phi, -1j * omega * phi.values) == pytest.approx(omega)
        conj = phi.conj()
        assert time_current_total(conj, np.conj(-1j * omega * phi.values)) == pytest.approx(-omega)
        assert time_current_total(phi, np.zeros(grid.n_points)) == 0.0
