import numpy as np
import pytest

from qdynkit.errors import ConfigurationError, RangeError
from qdynkit.operators import (
    MODEL_REGISTRY,
    MeckeParams,
    MorseParams,
    PowerNipParams,
    TabulatedFunction,
    eval_mecke,
    eval_morse,
    eval_power_nip,
    eval_taylor,
    load_tabulated,
)


class TestMorse:
    def test_minimum_and_asymptote(self):
        p = MorseParams(d_e=0.2, r_e=1.8, alf=1.1)
        assert eval_morse(p, 1.8) == pytest.approx(0.0)
        assert eval_morse(p, 100.0) == pytest.approx(0.2)
        # steep repulsive wall
        assert eval_morse(p, 0.5) > 0.2

    def test_curvature_matches_harmonic_limit(self):
        p = MorseParams(d_e=0.2, r_e=1.8, alf=1.1)
        h = 1e-4
        second = (
            eval_morse(p, 1.8 + h) - 2 * eval_morse(p, 1.8) + eval_morse(p, 1.8 - h)
        ) / h**2
        assert second == pytest.approx(2 * p.d_e * p.alf**2, rel=1e-4)

    def test_invalid_params(self):
        with pytest.raises(ConfigurationError):
            MorseParams(d_e=-1.0, r_e=1.0, alf=1.0)
        with pytest.raises(ConfigurationError):
            MorseParams(d_e=1.0, r_e=1.0, alf=0.0)


class TestMecke:
    def test_peak_at_r0(self):
        p = MeckeParams(q_0=1.6343157, r_0=1.1338359)
        r = np.linspace(0.2, 6.0, 2001)
        mu = eval_mecke(p, r)
        assert r[np.argmax(mu)] == pytest.approx(p.r_0, abs=0.01)
        assert eval_mecke(p, 0.0) == pytest.approx(0.0)


class TestPowerNip:
    def test_zero_inside_window(self):
        p = PowerNipParams(exp=4, min=1.0, max=6.0)
        r = np.linspace(1.0, 6.0, 50)
        np.testing.assert_array_equal(eval_power_nip(p, r), 0.0)

    def test_quartic_growth_outside(self):
        p = PowerNipParams(exp=4, min=1.0, max=6.0)
        assert eval_power_nip(p, 7.0) == pytest.approx(1.0)
        assert eval_power_nip(p, 8.0) == pytest.approx(16.0)
        assert eval_power_nip(p, 0.0) == pytest.approx(1.0)

    def test_strength_scales(self):
        p = PowerNipParams(exp=2, min=0.0, max=1.0, strength=3.0)
        assert eval_power_nip(p, 2.0) == pytest.approx(3.0)

    def test_invalid_window(self):
        with pytest.raises(ConfigurationError):
            PowerNipParams(exp=4, min=2.0, max=1.0)


class TestTaylor:
    def test_polynomial_with_factorials(self):
        # sum c_k (r - r0)^k / k!
        r = np.array([0.0, 1.0, 2.0])
        out = eval_taylor([1.0, 2.0, 3.0], 1.0, r)
        expected = 1.0 + 2.0 * (r - 1.0) + 1.5 * (r - 1.0) ** 2
        np.testing.assert_allclose(out, expected)


class TestTabulated:
    def test_interpolates_through_nodes(self, tmp_path):
        x = np.linspace(0.0, 3.0, 13)
        y = np.sin(x)
        path = tmp_path / "table.dat"
        np.savetxt(path, np.column_stack([x, y]), header="r mu")
        tab = load_tabulated(path)
        np.testing.assert_allclose(tab(x), y, atol=1e-12)
        # spline accuracy between nodes
        assert tab(1.37) == pytest.approx(np.sin(1.37), abs=1e-3)

    def test_out_of_range(self):
        tab = TabulatedFunction([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
        with pytest.raises(RangeError):
            tab(2.5)

    def test_bad_tables(self):
        with pytest.raises(ConfigurationError):
            TabulatedFunction([0.0], [1.0])
        with pytest.raises(ConfigurationError):
            TabulatedFunction([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])


class TestRegistry:
    def test_names(self):
        assert set(MODEL_REGISTRY) == {
            "morse", "mecke", "power", "taylor", "tabulated"
        }

    def test_factories_evaluate(self):
        f = MODEL_REGISTRY["morse"]({"d_e": 0.2, "r_e": 1.8, "alf": 1.1})
        assert f(1.8) == pytest.approx(0.0)
        f = MODEL_REGISTRY["taylor"]({"coeffs": [0.0, 1.0]})
        assert f(2.5) == pytest.approx(2.5)

    def test_missing_parameter(self):
        with pytest.raises(KeyError):
            MODEL_REGISTRY["morse"]({"d_e": 0.2})
