"""Run-time diagnostics: expectation values, spectra, phase space, densities.

All functions are pure; they read a wavefunction snapshot and return plain
numbers and arrays.  Conventions:

- populations and the autocorrelation are raw quadratic/bilinear forms, so
  per-channel populations sum to the squared norm;
- position/momentum moments and energies are normalized by the squared norm,
  so they remain physical expectation values after absorber losses;
- the squared momentum moment is read off the kinetic energy (``2 M <T>``),
  which for angular grids refers to the angular-momentum form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ConfigurationError, ShapeError, UnsupportedError
from .grids import Grid1D, _matmul_along, _mul_along
from .system import SystemSpec, WaveFunction

__all__ = [
    "ExpectationRecord",
    "expect",
    "spectrum",
    "wigner",
    "flux",
    "reduced_density",
    "level_populations",
    "dvr_density",
    "fbr_density",
]


@dataclass
class ExpectationRecord:
    t: float
    norm: float
    populations: Tuple[float, ...]
    position: Tuple[float, ...]
    position_unc: Tuple[float, ...]
    momentum: Tuple[float, ...]
    momentum_unc: Tuple[float, ...]
    potential: float
    kinetic: float
    total: float
    autocorrelation: complex


def _momentum_first_moment(grid: Grid1D, channels, axis):
    """<p> along one dof via FBR; zero for angular (legendre) grids."""
    if grid.kind == "legendre":
        return 0.0
    acc = 0.0
    for c in channels:
        coeff = grid.to_fbr(c, axis=axis)
        if grid.kind == "fft":
            pc = _mul_along(coeff, grid.fbr_momenta, axis)
        else:  # hermite: p = i sqrt(M w / 2) (a+ - a)
            n = grid.n_pts
            s = np.sqrt(grid.mass * grid.omega / 2.0)
            p_mat = np.zeros((n, n), dtype=complex)
            rng = np.arange(n - 1)
            p_mat[rng + 1, rng] = 1j * s * np.sqrt(rng + 1)
            p_mat[rng, rng + 1] = -1j * s * np.sqrt(rng + 1)
            pc = _matmul_along(p_mat, coeff, axis)
        acc += float(np.real(np.sum(np.conj(coeff) * pc)))
    return acc


def expect(sys: SystemSpec, psi: WaveFunction, psi0: WaveFunction = None, t=0.0):
    """All standard diagnostics for one snapshot (see module docstring)."""
    if psi.grid.shape != sys.grid.shape:
        raise ShapeError("wavefunction grid does not match system grid")
    grid = sys.grid
    w = grid.weight_tensor()
    pops = tuple(float(np.sum(w * np.abs(c) ** 2)) for c in psi.channels)
    norm2 = sum(pops)
    if norm2 <= 0:
        raise ConfigurationError("cannot compute expectations of a zero state")
    norm = float(np.sqrt(norm2))

    density = sum(w * np.abs(c) ** 2 for c in psi.channels)
    position = []
    position_unc = []
    momentum = []
    momentum_unc = []
    for axis, g in enumerate(grid.dofs):
        mesh_axis = g.points.reshape(
            [-1 if a == axis else 1 for a in range(grid.ndim)]
        )
        x1 = float(np.sum(mesh_axis * density)) / norm2
        x2 = float(np.sum(mesh_axis**2 * density)) / norm2
        position.append(x1)
        position_unc.append(float(np.sqrt(max(x2 - x1**2, 0.0))))

        t_axis = 0.0
        for c in psi.channels:
            tc = g.apply_kinetic(c, axis=axis)
            t_axis += float(np.real(np.sum(w * np.conj(c) * tc)))
        p1 = _momentum_first_moment(g, psi.channels, axis) / norm2
        p2 = 2.0 * g.mass * t_axis / norm2
        momentum.append(p1)
        momentum_unc.append(float(np.sqrt(max(p2 - p1**2, 0.0))))

    potential = 0.0
    for (i, j), v in sys.pot.items():
        if i == j:
            potential += float(np.sum(w * v * np.abs(psi.channels[i]) ** 2))
        else:
            potential += 2.0 * float(
                np.real(
                    np.sum(w * v * np.conj(psi.channels[i]) * psi.channels[j])
                )
            )
    potential /= norm2

    kinetic = 0.0
    for c in psi.channels:
        for axis, g in enumerate(grid.dofs):
            tc = g.apply_kinetic(c, axis=axis)
            kinetic += float(np.real(np.sum(w * np.conj(c) * tc)))
    kinetic /= norm2

    auto = psi0.overlap(psi) if psi0 is not None else complex(norm2)
    return ExpectationRecord(
        t=float(t),
        norm=norm,
        populations=pops,
        position=tuple(position),
        position_unc=tuple(position_unc),
        momentum=tuple(momentum),
        momentum_unc=tuple(momentum_unc),
        potential=potential,
        kinetic=kinetic,
        total=potential + kinetic,
        autocorrelation=auto,
    )


def spectrum(autocorrelation, dt_main, window="hann"):
    """Windowed DFT of an autocorrelation series.

    Returns ``(omega, intensity)`` in ascending frequency order; a phase
    factor ``exp(-i E t)`` in the input produces a peak at ``omega = +E``.
    """
    a = np.asarray(autocorrelation, dtype=complex)
    if a.ndim != 1 or len(a) < 4:
        raise ConfigurationError("spectrum needs a 1-D series of >= 4 samples")
    if dt_main <= 0:
        raise ConfigurationError(f"dt_main must be positive, got {dt_main}")
    n = len(a)
    if window == "hann":
        win = np.hanning(n)
    elif window in (None, "none"):
        win = np.ones(n)
    else:
        raise ConfigurationError(f"unknown window {window!r} (hann|none)")
    omega = 2.0 * np.pi * np.fft.fftfreq(n, d=dt_main)
    # sign convention: positive frequencies for exp(-i E t) input
    intensity = np.abs(np.fft.ifft(a * win)) * n * dt_main
    order = np.argsort(omega)
    return omega[order], intensity[order]


def wigner(psi, grid: Grid1D = None) -> np.ndarray:
    """Discrete Wigner distribution on the N x N phase-space grid.

    ``psi`` is a 1-D amplitude array on an fft grid (or a one-dof
    WaveFunction, whose per-channel distributions are summed).  Rows follow
    the position grid; columns follow the FBR momentum ladder in the same
    (fftfreq) order as ``grid.fbr_momenta``.  Normalization satisfies both
    marginal identities exactly: summing columns times the ladder spacing
    gives |psi(R_i)|^2 and summing rows times dx gives the FBR density per
    unit momentum.

    The symmetric-point products are evaluated on a doubled auxiliary grid
    obtained by bandlimited interpolation (spectral zero-padding); averaging
    adjacent momentum columns removes the even/odd aliasing ghosts.
    """
    if isinstance(psi, WaveFunction):
        if psi.grid.ndim != 1:
            raise UnsupportedError("wigner needs a one-dimensional grid")
        g = psi.grid.dofs[0]
        out = sum(wigner(np.asarray(c), g) for c in psi.channels)
        return out
    if grid is None:
        raise ConfigurationError("wigner needs the Grid1D for a bare array")
    if grid.kind != "fft":
        raise UnsupportedError(f"wigner supports fft grids only, got {grid.kind}")
    psi = np.asarray(psi, dtype=complex)
    n = grid.n_pts
    if psi.shape != (n,):
        raise ShapeError(f"expected shape ({n},), got {psi.shape}")
    dx = float(grid.weights[0])

    c = np.fft.fft(psi)
    c2 = np.zeros(2 * n, dtype=complex)
    half = n // 2
    c2[:half] = c[:half]
    c2[-(n - half):] = c[half:]
    fine = np.fft.ifft(c2) * 2.0  # spacing dx/2, preserves original samples

    m = np.arange(2 * n)
    j = 2 * np.arange(n)[:, None]
    corr = np.conj(fine[(j + m) % (2 * n)]) * fine[(j - m) % (2 * n)]
    f = np.real(np.fft.fft(corr, axis=1))

    k = np.arange(n)
    le = (-2 * k) % (2 * n)
    w = 0.25 * (f[:, (le - 1) % (2 * n)] + 2.0 * f[:, le] + f[:, (le + 1) % (2 * n)])
    return w * dx / (2.0 * np.pi)


def flux(sys: SystemSpec, psi: WaveFunction):
    """Probability-flux tensors Re(psi* (-i d/dR) psi) / M, one per dof."""
    grid = psi.grid
    if grid.ndim > 2 or any(g.kind != "fft" for g in grid.dofs):
        raise UnsupportedError("flux supports 1-D or 2-D fft grids only")
    out = []
    for axis, g in enumerate(grid.dofs):
        j = np.zeros(grid.shape)
        for c in psi.channels:
            coeff = np.fft.fft(c, axis=axis)
            grad = np.fft.ifft(
                _mul_along(coeff, 1j * g.fbr_momenta, axis), axis=axis
            )
            j += np.real(np.conj(c) * -1j * grad)
        out.append(j / g.mass)
    return out


def reduced_density(psi: WaveFunction, dof: int):
    """Reduced density matrix for one dof and its purity.

    Contracts the weighted amplitudes over all other dofs and sums over
    channels.  The matrix is returned in the weight-orthonormal basis of the
    selected dof, normalized to unit trace; purity is ``tr(rho^2)``.
    """
    grid = psi.grid
    if not 0 <= dof < grid.ndim:
        raise ConfigurationError(f"dof {dof} out of range for {grid.ndim} dofs")
    sqrt_w = np.sqrt(grid.weight_tensor())
    n_k = grid.shape[dof]
    rho = np.zeros((n_k, n_k), dtype=complex)
    for c in psi.channels:
        u = np.moveaxis(sqrt_w * c, dof, 0).reshape(n_k, -1)
        rho += u @ u.conj().T
    tr = float(np.real(np.trace(rho)))
    if tr <= 0:
        raise ConfigurationError("cannot normalize a zero density matrix")
    rho /= tr
    rho = 0.5 * (rho + rho.conj().T)
    purity = float(np.real(np.sum(rho * rho.T)))
    return rho, purity


def level_populations(psi: WaveFunction, eigenbasis):
    """p_v = |<Psi_v|Psi>|^2 against a bound-state basis."""
    states = getattr(eigenbasis, "states", eigenbasis)
    return np.array([abs(s.overlap(psi)) ** 2 for s in states])


def dvr_density(psi: WaveFunction):
    """Per-channel coordinate densities |psi(R)|^2."""
    return [np.abs(c) ** 2 for c in psi.channels]


def fbr_density(psi: WaveFunction):
    """Per-channel FBR densities |c_n|^2 (full transform over all dofs)."""
    out = []
    for c in psi.channels:
        coeff = c
        for axis, g in enumerate(psi.grid.dofs):
            coeff = g.to_fbr(coeff, axis=axis)
        out.append(np.abs(coeff) ** 2)
    return out
