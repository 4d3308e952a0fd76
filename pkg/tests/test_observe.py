import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdynkit.errors import ConfigurationError, UnsupportedError
from qdynkit.grids import ProductGrid, build_fft_grid, build_legendre_grid
from qdynkit.observe import (
    dvr_density,
    expect,
    fbr_density,
    flux,
    level_populations,
    reduced_density,
    spectrum,
    wigner,
)
from qdynkit.stationary import solve_bound_states
from qdynkit.system import WaveFunction, assemble, init_gauss, product_state


def free_sys(n=64, mass=1.0, lo=-8.0, hi=8.0):
    g = build_fft_grid(n, lo, hi, mass)
    pg = ProductGrid((g,))
    sys = assemble(pg, 1, pot={(0, 0): (0, lambda x: np.zeros_like(x))})
    return sys, g, pg


def random_wf(pg, rng, n_channels=1):
    shape = pg.shape
    return WaveFunction(
        [rng.normal(size=shape) + 1j * rng.normal(size=shape)
         for _ in range(n_channels)],
        pg,
    )


class TestExpect:
    def test_populations_sum_to_norm2(self, rng):
        sys, g, pg = free_sys()
        sys2 = assemble(
            pg, 2, pot={(0, 0): (0, lambda x: np.zeros_like(x))}
        )
        psi = random_wf(pg, rng, n_channels=2)
        r = expect(sys2, psi)
        assert sum(r.populations) == pytest.approx(psi.norm2(), rel=1e-12)
        assert r.norm == pytest.approx(psi.norm(), rel=1e-12)

    def test_moments_of_boosted_gaussian(self):
        sys, g, pg = free_sys(n=128)
        psi = product_state([init_gauss(g, 1.0, 0.5, momentum_0=2.0)], pg)
        r = expect(sys, psi)
        assert r.position[0] == pytest.approx(1.0, abs=1e-6)
        assert r.momentum[0] == pytest.approx(2.0, abs=1e-6)
        # Gaussian exp(-(x/2w)^2) has position spread w and momentum 1/(2w)
        assert r.position_unc[0] == pytest.approx(0.5, abs=1e-6)
        assert r.momentum_unc[0] == pytest.approx(1.0, abs=1e-6)
        assert r.total == pytest.approx(r.kinetic)

    def test_normalization_invariance(self, rng):
        # moments are physical even when the absorber has eaten norm
        sys, g, pg = free_sys()
        psi = random_wf(pg, rng)
        a = expect(sys, psi)
        scaled = WaveFunction([0.3 * psi.channels[0]], pg)
        b = expect(sys, scaled)
        assert b.position[0] == pytest.approx(a.position[0], rel=1e-12)
        assert b.total == pytest.approx(a.total, rel=1e-12)
        assert b.norm == pytest.approx(0.3 * a.norm, rel=1e-12)

    def test_autocorrelation_reference(self, rng):
        sys, g, pg = free_sys()
        psi0 = random_wf(pg, rng)
        r = expect(sys, psi0, psi0)
        assert r.autocorrelation == pytest.approx(psi0.norm2())

    def test_zero_state_rejected(self):
        sys, g, pg = free_sys()
        with pytest.raises(ConfigurationError):
            expect(sys, WaveFunction([np.zeros(64)], pg))

    def test_legendre_momentum_zero(self, rng):
        g = build_legendre_grid(12, 1.0, 1.5)
        pg = ProductGrid((g,))
        sys = assemble(pg, 1, pot={(0, 0): (0, lambda x: np.zeros_like(x))})
        r = expect(sys, random_wf(pg, rng))
        assert r.momentum[0] == 0.0
        assert r.momentum_unc[0] > 0.0


class TestSpectrum:
    def test_single_line(self):
        e = 0.35
        dt = 0.5
        t = dt * np.arange(512)
        omega, intensity = spectrum(np.exp(-1j * e * t), dt)
        assert omega[np.argmax(intensity)] == pytest.approx(e, abs=0.05)

    def test_two_lines_resolved(self):
        dt = 0.5
        t = dt * np.arange(2048)
        a = 0.6 * np.exp(-1j * 0.2 * t) + 0.4 * np.exp(-1j * 1.1 * t)
        omega, intensity = spectrum(a, dt)
        for e in (0.2, 1.1):
            window = np.abs(omega - e) < 0.05
            assert np.max(intensity[window]) > 0.3 * np.max(intensity)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            spectrum([1.0, 2.0], 0.5)
        with pytest.raises(ConfigurationError):
            spectrum(np.ones(8), -1.0)
        with pytest.raises(ConfigurationError):
            spectrum(np.ones(8), 0.5, window="hamming")


class TestWigner:
    def test_marginals_random_state(self, rng):
        sys, g, pg = free_sys(n=32)
        psi = random_wf(pg, rng)
        w = wigner(psi)
        dx = g.weights[0]
        dp = 2 * np.pi / (g.n_pts * dx)
        pos = np.sum(w, axis=1) * dp
        np.testing.assert_allclose(
            pos, np.abs(psi.channels[0]) ** 2, atol=1e-10
        )
        c = g.to_fbr(psi.channels[0])
        mom = np.sum(w, axis=0) * dx
        np.testing.assert_allclose(mom, np.abs(c) ** 2 / dp, atol=1e-10)

    def test_total_mass(self, rng):
        sys, g, pg = free_sys(n=32)
        psi = random_wf(pg, rng)
        w = wigner(psi)
        dx = g.weights[0]
        dp = 2 * np.pi / (g.n_pts * dx)
        assert np.sum(w) * dx * dp == pytest.approx(psi.norm2(), rel=1e-10)

    def test_gaussian_peaks_at_phase_space_center(self):
        sys, g, pg = free_sys(n=64)
        psi = product_state([init_gauss(g, 0.0, 0.8)], pg)
        w = wigner(psi)
        i, k = np.unravel_index(np.argmax(w), w.shape)
        assert g.points[i] == pytest.approx(0.0, abs=g.weights[0])
        assert g.fbr_momenta[k] == pytest.approx(0.0, abs=1e-12)
        # near-minimum-uncertainty states are only marginally negative
        assert np.min(w) > -0.02 * np.max(w)

    def test_bare_array_interface(self, rng):
        g = build_fft_grid(16, -2.0, 2.0, 1.0)
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        w = wigner(psi, g)
        assert w.shape == (16, 16)
        with pytest.raises(ConfigurationError):
            wigner(psi)

    def test_non_fft_rejected(self, rng):
        g = build_legendre_grid(8, 1.0, 1.0)
        with pytest.raises(UnsupportedError):
            wigner(rng.normal(size=8) + 0j, g)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_marginals_property(self, seed):
        g = build_fft_grid(16, -3.0, 3.0, 1.0)
        r = np.random.default_rng(seed)
        psi = r.normal(size=16) + 1j * r.normal(size=16)
        w = wigner(psi, g)
        dx = g.weights[0]
        dp = 2 * np.pi / (16 * dx)
        np.testing.assert_allclose(
            np.sum(w, axis=1) * dp, np.abs(psi) ** 2, atol=1e-9
        )


class TestFlux:
    def test_plane_wave_flux(self):
        sys, g, pg = free_sys(n=64, mass=1.0)
        k = 2 * np.pi * 4 / 16.0
        psi = WaveFunction([np.exp(1j * k * g.points)], pg)
        j = flux(sys, psi)[0]
        np.testing.assert_allclose(j, k, atol=1e-10)

    def test_flux_momentum_identity(self, rng):
        sys, g, pg = free_sys(n=64, mass=1.7)
        psi = random_wf(pg, rng)
        j = flux(sys, psi)[0]
        r = expect(sys, psi)
        total = np.sum(j * g.weights[0])
        assert total == pytest.approx(
            r.momentum[0] / 1.7 * psi.norm2(), abs=1e-10
        )

    def test_two_dof(self, rng):
        a = build_fft_grid(16, -2.0, 2.0, 1.0)
        b = build_fft_grid(8, -2.0, 2.0, 2.0)
        pg = ProductGrid((a, b))
        sys = assemble(pg, 1, pot={(0, 0): lambda x, y: np.zeros_like(x)})
        psi = random_wf(pg, rng)
        out = flux(sys, psi)
        assert len(out) == 2
        assert out[0].shape == (16, 8)

    def test_legendre_rejected(self, rng):
        g = build_legendre_grid(8, 1.0, 1.0)
        pg = ProductGrid((g,))
        sys = assemble(pg, 1)
        with pytest.raises(UnsupportedError):
            flux(sys, random_wf(pg, rng))


class TestReducedDensity:
    def test_product_state_pure(self):
        a = build_fft_grid(16, -4.0, 4.0, 1.0)
        b = build_fft_grid(12, -4.0, 4.0, 1.0)
        pg = ProductGrid((a, b))
        psi = product_state(
            [init_gauss(a, 0.5, 0.6), init_gauss(b, -0.5, 0.4)], pg
        )
        for dof in (0, 1):
            rho, purity = reduced_density(psi, dof)
            assert np.trace(rho) == pytest.approx(1.0, rel=1e-12)
            np.testing.assert_allclose(rho, rho.conj().T, atol=1e-13)
            assert purity == pytest.approx(1.0, abs=1e-10)

    def test_entangled_state_mixed(self):
        a = build_fft_grid(16, -4.0, 4.0, 1.0)
        pg = ProductGrid((a, a))
        t1 = np.multiply.outer(init_gauss(a, -1.0, 0.4), init_gauss(a, -1.0, 0.4))
        t2 = np.multiply.outer(init_gauss(a, 1.0, 0.4), init_gauss(a, 1.0, 0.4))
        psi = WaveFunction([t1 + t2], pg)
        rho, purity = reduced_density(psi, 0)
        assert purity < 0.9
        vals = np.linalg.eigvalsh(rho)
        assert vals[0] > -1e-12

    def test_dof_range(self, rng):
        sys, g, pg = free_sys()
        with pytest.raises(ConfigurationError):
            reduced_density(random_wf(pg, rng), 1)


class TestLevelPopulations:
    def test_eigenstate_projection(self):
        g = build_fft_grid(48, -8.0, 8.0, 1.0)
        pg = ProductGrid((g,))
        sys = assemble(pg, 1, pot={(0, 0): (0, lambda x: 0.5 * x**2)})
        result = solve_bound_states(sys, 5)
        psi = result.states[3]
        pops = level_populations(psi, result)
        assert pops[3] == pytest.approx(1.0, abs=1e-10)
        assert np.sum(pops) == pytest.approx(1.0, abs=1e-10)


class TestDensities:
    def test_dvr_fbr_density_norms(self, rng):
        sys, g, pg = free_sys(n=32)
        psi = random_wf(pg, rng)
        dvr = dvr_density(psi)[0]
        fbr = fbr_density(psi)[0]
        assert np.sum(dvr * g.weights) == pytest.approx(psi.norm2(), rel=1e-12)
        assert np.sum(fbr) == pytest.approx(psi.norm2(), rel=1e-12)
