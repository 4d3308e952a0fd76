"""Analytic model functions for potentials, dipoles and absorbers.

All evaluators are vectorized over numpy arrays; parameters live in small
frozen dataclasses.  The ``MODEL_REGISTRY`` at the bottom maps config model
names to evaluator factories used by the assembly layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, RangeError

__all__ = [
    "MorseParams",
    "MeckeParams",
    "PowerNipParams",
    "TabulatedFunction",
    "JahnTellerParams",
    "eval_morse",
    "eval_mecke",
    "eval_power_nip",
    "eval_taylor",
    "eval_tabulated",
    "eval_jahn_teller",
    "load_tabulated",
    "MODEL_REGISTRY",
]


@dataclass(frozen=True)
class MorseParams:
    d_e: float
    r_e: float
    alf: float

    def __post_init__(self):
        if self.d_e <= 0:
            raise ConfigurationError(f"d_e must be positive, got {self.d_e}")
        if self.alf <= 0:
            raise ConfigurationError(f"alf must be positive, got {self.alf}")


@dataclass(frozen=True)
class MeckeParams:
    q_0: float
    r_0: float

    def __post_init__(self):
        if self.r_0 <= 0:
            raise ConfigurationError(f"r_0 must be positive, got {self.r_0}")


@dataclass(frozen=True)
class PowerNipParams:
    exp: float
    min: float
    max: float
    strength: float = 1.0

    def __post_init__(self):
        if self.exp <= 0:
            raise ConfigurationError(f"exp must be positive, got {self.exp}")
        if self.min >= self.max:
            raise ConfigurationError(
                f"nip window needs min < max, got [{self.min}, {self.max}]"
            )


@dataclass(frozen=True)
class JahnTellerParams:
    kappa: float
    lam: float


class TabulatedFunction:
    """Two-column table with natural cubic-spline interpolation."""

    def __init__(self, abscissae, ordinates):
        x = np.asarray(abscissae, dtype=float)
        y = np.asarray(ordinates, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise ConfigurationError("table needs matching 1-D columns, >= 2 rows")
        if np.any(np.diff(x) <= 0):
            raise ConfigurationError("table abscissae must be strictly increasing")
        self.abscissae = x
        self.ordinates = y
        self._spline = CubicSpline(x, y, bc_type="natural")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.abscissae[0]) or np.any(r > self.abscissae[-1]):
            raise RangeError(
                f"query outside table range "
                f"[{self.abscissae[0]}, {self.abscissae[-1]}]"
            )
        return self._spline(r)


def load_tabulated(path) -> TabulatedFunction:
    """Read a two-column whitespace table; '#' starts a comment."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ConfigurationError(f"{path}: expected two columns, got {data.shape[1]}")
    return TabulatedFunction(data[:, 0], data[:, 1])


def eval_morse(params: MorseParams, r):
    """D_e (1 - exp(-alf (R - R_e)))^2"""
    r = np.asarray(r, dtype=float)
    return params.d_e * (1.0 - np.exp(-params.alf * (r - params.r_e))) ** 2


def eval_mecke(params: MeckeParams, r):
    """q_0 R exp(-R / R_0)"""
    r = np.asarray(r, dtype=float)
    return params.q_0 * r * np.exp(-r / params.r_0)


def eval_power_nip(params: PowerNipParams, r):
    """Truncated power absorber, zero inside [min, max]."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    left = r < params.min
    right = r > params.max
    out = np.where(left, (params.min - r) ** params.exp, out)
    out = np.where(right, (r - params.max) ** params.exp, out)
    return params.strength * out


def eval_taylor(coefficients, center, r):
    """sum_k c_k (R - center)^k / k!"""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    fact = 1.0
    for k, c in enumerate(coefficients):
        if k > 0:
            fact *= k
        out = out + c * (r - center) ** k / fact
    return out


def eval_tabulated(tab: TabulatedFunction, r):
    return tab(r)


def eval_jahn_teller(params: JahnTellerParams, x, y):
    """Diabatic 2x2 matrix [[kx, ly], [ly, -kx]] at (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v11 = params.kappa * x
    v12 = params.lam * y
    return np.array([[v11, v12], [v12, -v11]])


# Model name -> (param keys -> pointwise callable of one coordinate).
# Multi-coordinate models (jahn_teller) are composed from 1-D entries in the
# config layer instead.
def _make_morse(p):
    params = MorseParams(d_e=p["d_e"], r_e=p["r_e"], alf=p["alf"])
    return lambda r: eval_morse(params, r)


def _make_mecke(p):
    params = MeckeParams(q_0=p["q_0"], r_0=p["r_0"])
    return lambda r: eval_mecke(params, r)


def _make_power(p):
    params = PowerNipParams(
        exp=p["exp"], min=p["min"], max=p["max"], strength=p.get("strength", 1.0)
    )
    return lambda r: eval_power_nip(params, r)


def _make_taylor(p):
    coeffs = list(p["coeffs"])
    center = p.get("center", 0.0)
    return lambda r: eval_taylor(coeffs, center, r)


def _make_tabulated(p):
    tab = load_tabulated(p["file"])
    return tab


MODEL_REGISTRY = {
    "morse": _make_morse,
    "mecke": _make_mecke,
    "power": _make_power,
    "taylor": _make_taylor,
    "tabulated": _make_tabulated,
}
