import numpy as np
import pytest

from qdynkit.errors import ConfigurationError, UnsupportedError
from qdynkit.grids import ProductGrid, build_fft_grid, build_hermite_grid
from qdynkit.propagators import (
    ChebyParams,
    Pulse,
    TimeGrid,
    apply_nip,
    cheby_coefficients,
    field_value,
    propagate,
    relax,
    relax_excited,
    spectral_bounds,
    step_cheby,
    step_split,
)
from qdynkit.system import (
    apply_hamiltonian,
    assemble,
    init_gauss,
    product_state,
)


def harmonic_sys(n=32, mass=1.0, omega=1.0):
    g = build_fft_grid(n, -6.0, 6.0, mass)
    pg = ProductGrid((g,))
    sys = assemble(
        pg, 1, pot={(0, 0): (0, lambda x: 0.5 * mass * omega**2 * x**2)}
    )
    return sys, g, pg


class TestTimeGrid:
    def test_sub_delta(self):
        tg = TimeGrid(main_delta=2.0, main_stop=5, sub_n=4)
        assert tg.sub_delta == pytest.approx(0.5)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(main_delta=0.0, main_stop=1),
            dict(main_delta=1.0, main_stop=0),
            dict(main_delta=1.0, main_stop=1, sub_n=0),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ConfigurationError):
            TimeGrid(**kwargs)


class TestPulse:
    def test_sin2_support_and_peak(self):
        p = Pulse(shape="sin2", delay=10.0, fwhm=4.0, ampli=0.3, frequ=0.0)
        assert p(10.0) == pytest.approx(0.3)
        assert p(14.0) == 0.0
        assert p(5.9) == 0.0
        assert p(12.0) == pytest.approx(0.3 * np.cos(np.pi / 4) ** 2)

    def test_gauss_fwhm(self):
        p = Pulse(shape="gauss", delay=0.0, fwhm=2.0, ampli=1.0, frequ=0.0)
        assert p(1.0) == pytest.approx(0.5)

    def test_carrier_and_phase(self):
        p = Pulse(shape="rect", delay=0.0, fwhm=100.0, ampli=1.0,
                  frequ=0.5, phase=np.pi / 2)
        assert p(0.0) == pytest.approx(0.0, abs=1e-12)
        assert p(np.pi) == pytest.approx(-np.cos(0.0), abs=1e-12)

    def test_chirp_shifts_frequency(self):
        p = Pulse(shape="rect", delay=0.0, fwhm=1e6, ampli=1.0,
                  frequ=1.0, chirp=0.1)
        s = 2.0
        assert p(s) == pytest.approx(np.cos((1.0 + 0.1 * s) * s))

    def test_tabulated(self, tmp_path):
        path = tmp_path / "field.dat"
        t = np.linspace(-1.0, 1.0, 21)
        np.savetxt(path, np.column_stack([t, t**2]))
        p = Pulse(shape="tabulated", delay=5.0, file=str(path))
        assert p(5.5) == pytest.approx(0.25, abs=1e-6)

    def test_field_value_sums(self):
        a = Pulse(shape="rect", fwhm=10.0, ampli=1.0)
        b = Pulse(shape="rect", fwhm=10.0, ampli=2.0)
        assert field_value([a, b], 0.0) == pytest.approx(3.0)

    def test_unknown_shape(self):
        with pytest.raises(ConfigurationError):
            Pulse(shape="triangle")


class TestChebyCoefficients:
    def test_first_is_bessel_j0(self):
        c = cheby_coefficients(5.0, 1e-8, "real")
        from scipy.special import jv
        assert c[0] == pytest.approx(jv(0, 5.0))
        assert c[1] == pytest.approx(2 * jv(1, 5.0))

    def test_truncation_monotone_in_precision(self):
        loose = cheby_coefficients(76.8237, 1e-4, "real")
        tight = cheby_coefficients(76.8237, 1e-10, "real")
        assert len(loose) < len(tight)

    def test_imag_coefficients_positive_decay(self):
        c = cheby_coefficients(10.0, 1e-8, "imag")
        assert np.all(c > 0)
        assert c[-1] < c[1]

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            cheby_coefficients(-1.0, 1e-8)
        with pytest.raises(ConfigurationError):
            cheby_coefficients(1.0, 2.0)


class TestSpectralBounds:
    def test_covers_spectrum(self):
        sys, g, pg = harmonic_sys()
        e_min, e_max = spectral_bounds(sys)
        assert e_min == pytest.approx(float(np.min(sys.pot[(0, 0)])))
        assert e_max >= float(np.max(sys.pot[(0, 0)])) + g.kinetic_max() - 1e-12

    def test_truncated_window(self):
        sys, _, _ = harmonic_sys()
        e_min, e_max = spectral_bounds(sys, delta_e_truncate=2.0)
        assert e_max - e_min == pytest.approx(2.0)
        with pytest.raises(ConfigurationError):
            spectral_bounds(sys, delta_e_truncate=-1.0)


class TestSteppers:
    def test_split_norm_conservation(self):
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.0, 0.5)], pg)
        for order in (2, 3):
            phi = psi.copy()
            for _ in range(50):
                phi = step_split(sys, phi, 0.0, 0.05, order=order)
            assert phi.norm2() == pytest.approx(1.0, abs=1e-12)

    def test_strang_coherent_state_period(self):
        # coherent state returns to the start after one harmonic period
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.5, np.sqrt(0.5) / 2)], pg)
        phi = psi.copy()
        period = 2 * np.pi
        n = 2000
        for _ in range(n):
            phi = step_split(sys, phi, 0.0, period / n, order=3)
        assert abs(psi.overlap(phi)) == pytest.approx(1.0, abs=1e-4)

    def test_cheby_matches_strang(self):
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.0, 0.5)], pg)
        dt = 0.5
        a = step_cheby(sys, psi, dt, ChebyParams(precision=1e-12))
        b = psi.copy()
        for _ in range(2000):
            b = step_split(sys, b, 0.0, dt / 2000, order=3)
        err = np.max(np.abs(a.channels[0] - b.channels[0]))
        assert err < 1e-5

    def test_cheby_real_unitary(self):
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.0, 0.5)], pg)
        out = step_cheby(sys, psi, 1.0, ChebyParams(precision=1e-10))
        assert out.norm2() == pytest.approx(1.0, abs=1e-9)

    def test_nip_damps_norm(self):
        g = build_fft_grid(32, -6.0, 6.0, 1.0)
        pg = ProductGrid((g,))
        sys = assemble(
            pg, 1,
            pot={(0, 0): (0, lambda x: np.zeros_like(x))},
            nip=(0, lambda x: np.where(np.abs(x) > 4.0, 1.0, 0.0)),
        )
        psi = product_state([init_gauss(g, 4.5, 0.3)], pg)
        out = apply_nip(sys, psi, 1.0)
        assert out.norm2() < psi.norm2()
        out2 = apply_nip(sys, product_state([init_gauss(g, 0.0, 0.3)], pg), 1.0)
        assert out2.norm2() == pytest.approx(1.0, abs=1e-6)


class TestDrivers:
    def test_propagate_records_and_callback(self):
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.0, 0.5)], pg)
        seen = []
        records = propagate(
            sys, psi, TimeGrid(main_delta=0.2, main_stop=5, sub_n=4),
            propagator="strang",
            step_callback=lambda s, t, p: seen.append((s, t)),
        )
        assert len(records) == 6
        assert [s for s, _ in seen] == list(range(6))
        assert records[0].autocorrelation == pytest.approx(1.0)
        assert records[-1].t == pytest.approx(1.0)

    def test_propagate_unknown_name(self):
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.0, 0.5)], pg)
        with pytest.raises(ConfigurationError):
            propagate(sys, psi, TimeGrid(main_delta=0.1, main_stop=1),
                      propagator="rk4")

    def test_cheby_rejects_pulses(self):
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.0, 0.5)], pg)
        with pytest.raises(UnsupportedError):
            propagate(
                sys, psi, TimeGrid(main_delta=0.1, main_stop=1),
                propagator="cheby_real",
                pulses=[Pulse(shape="rect", fwhm=1.0, ampli=0.1)],
            )

    def test_relax_harmonic_ground_state(self):
        sys, g, pg = harmonic_sys()
        psi0 = product_state([init_gauss(g, 2.0, 0.8)], pg)
        psi, e, energies = relax(
            sys, psi0, TimeGrid(main_delta=3.0, main_stop=30), tol=1e-12
        )
        assert e == pytest.approx(0.5, abs=1e-8)
        assert energies == sorted(energies, reverse=True)

    def test_relax_excited_orthogonal(self):
        sys, g, pg = harmonic_sys()
        tg = TimeGrid(main_delta=3.0, main_stop=40)
        gs, e0, _ = relax(
            sys, product_state([init_gauss(g, 1.0, 0.8)], pg), tg, tol=1e-13
        )
        # odd start has good overlap with the first excited state
        start = product_state([init_gauss(g, 2.0, 0.6)], pg)
        ex, e1, _ = relax_excited(sys, start, tg, k=1, lower_states=[gs], tol=1e-13)
        assert e1 == pytest.approx(1.5, abs=1e-6)
        assert abs(gs.overlap(ex)) < 1e-6
        with pytest.raises(ConfigurationError):
            relax_excited(sys, start, tg, k=0, lower_states=[])

    def test_relax_needs_imag_mode(self):
        sys, g, pg = harmonic_sys()
        psi = product_state([init_gauss(g, 1.0, 0.5)], pg)
        with pytest.raises(ConfigurationError):
            relax(sys, psi, TimeGrid(main_delta=1.0, main_stop=1),
                  cheby=ChebyParams(mode="real"))

    def test_hermite_grid_propagation(self):
        # eigenstate of the oscillator only picks up a phase
        mass, omega = 2.0, 0.7
        g = build_hermite_grid(12, mass, omega, 0.0)
        pg = ProductGrid((g,))
        sys = assemble(
            pg, 1, pot={(0, 0): (0, lambda x: 0.5 * mass * omega**2 * x**2)}
        )
        coeff = np.zeros(12, dtype=complex)
        coeff[0] = 1.0
        psi = product_state([g.from_fbr(coeff)], pg)
        records = propagate(
            sys, psi, TimeGrid(main_delta=0.5, main_stop=4, sub_n=20),
            propagator="strang",
        )
        e0 = 0.5 * omega
        for r in records:
            assert abs(r.autocorrelation) == pytest.approx(1.0, abs=1e-9)
            assert r.total == pytest.approx(e0, abs=1e-8)
        phase = np.angle(records[-1].autocorrelation)
        assert np.exp(1j * phase) == pytest.approx(np.exp(-1j * e0 * 2.0), abs=1e-4)
