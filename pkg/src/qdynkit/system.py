"""Hamiltonian assembly on product grids, initial states, channel transforms.

The Hamiltonian acts as ``T + V - F(t) mu`` on a vector of channel tensors;
the absorber ``W`` is stored here but applied only by the propagation driver
so that the operator used inside polynomial propagators stays Hermitian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, ShapeError
from .grids import Grid1D, ProductGrid

__all__ = [
    "WaveFunction",
    "SystemSpec",
    "assemble",
    "apply_hamiltonian",
    "adiabatic_transform",
    "init_gauss",
    "init_morse_eigenstate",
    "morse_energy",
    "morse_bound_count",
    "product_state",
]

log = logging.getLogger(__name__)


@dataclass
class WaveFunction:
    """nu complex channel tensors on a shared product grid."""

    channels: list
    grid: ProductGrid

    def __post_init__(self):
        shape = self.grid.shape
        self.channels = [np.asarray(c, dtype=complex) for c in self.channels]
        for c in self.channels:
            if c.shape != shape:
                raise ShapeError(f"channel shape {c.shape} != grid shape {shape}")

    @property
    def n_channels(self):
        return len(self.channels)

    def copy(self):
        return WaveFunction([c.copy() for c in self.channels], self.grid)

    def norm2(self) -> float:
        w = self.grid.weight_tensor()
        return float(sum(np.sum(w * np.abs(c) ** 2) for c in self.channels))

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def normalize(self):
        n = self.norm()
        if n == 0:
            raise ConfigurationError("cannot normalize a zero wavefunction")
        for c in self.channels:
            c /= n
        return self

    def overlap(self, other: "WaveFunction") -> complex:
        """<self|other> with DVR quadrature weights."""
        if other.grid is not self.grid and other.grid.shape != self.grid.shape:
            raise ShapeError("wavefunctions live on different grids")
        w = self.grid.weight_tensor()
        return complex(
            sum(
                np.sum(w * np.conj(a) * b)
                for a, b in zip(self.channels, other.channels)
            )
        )


@dataclass
class SystemSpec:
    """Operator grids for one simulation: potential matrix, NIP, dipoles.

    ``pot`` holds the upper triangle of the symmetric diabatic potential
    matrix keyed by 0-based ``(i, j)`` with ``i <= j``; absent entries are
    zero.  ``dip_p`` is keyed by channel, ``dip_t`` by ``(i, j)`` with
    ``i < j``.
    """

    grid: ProductGrid
    n_channels: int = 1
    pot: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    nip: Optional[np.ndarray] = None
    dip_p: Dict[int, np.ndarray] = field(default_factory=dict)
    dip_t: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shape = self.grid.shape
        if self.n_channels < 1:
            raise ConfigurationError("n_channels must be >= 1")
        for (i, j), v in self.pot.items():
            if not (0 <= i <= j < self.n_channels):
                raise ConfigurationError(f"potential channel pair {(i, j)} out of range")
            if v.shape != shape:
                raise ShapeError(f"pot[{i},{j}] shape {v.shape} != grid {shape}")
        if self.nip is not None:
            if self.nip.shape != shape:
                raise ShapeError("nip shape mismatch")
            if np.any(self.nip < 0):
                raise ConfigurationError("nip must be non-negative pointwise")
        for i, v in self.dip_p.items():
            if not 0 <= i < self.n_channels:
                raise ConfigurationError(f"dip_p channel {i} out of range")
            if v.shape != shape:
                raise ShapeError("dip_p shape mismatch")
        for (i, j), v in self.dip_t.items():
            if not (0 <= i < j < self.n_channels):
                raise ConfigurationError(f"dip_t channel pair {(i, j)} out of range")
            if v.shape != shape:
                raise ShapeError("dip_t shape mismatch")
        self._pot_eig = None
        self._dip_eig = None

    # -- dense per-point channel matrices -----------------------------------

    def potential_matrix(self) -> np.ndarray:
        """Stacked symmetric potential, shape grid.shape + (nu, nu)."""
        nu = self.n_channels
        mat = np.zeros(self.grid.shape + (nu, nu))
        for (i, j), v in self.pot.items():
            mat[..., i, j] = v
            if i != j:
                mat[..., j, i] = v
        return mat

    def potential_eig(self):
        """Cached pointwise eigendecomposition of the potential matrix."""
        if self._pot_eig is None:
            vals, vecs = np.linalg.eigh(self.potential_matrix())
            self._pot_eig = (vals, vecs)
        return self._pot_eig

    def transition_dipole_eig(self):
        """Cached pointwise eigendecomposition of the mu_t matrix."""
        if self._dip_eig is None:
            nu = self.n_channels
            mat = np.zeros(self.grid.shape + (nu, nu))
            for (i, j), v in self.dip_t.items():
                mat[..., i, j] = v
                mat[..., j, i] = v
            vals, vecs = np.linalg.eigh(mat)
            self._dip_eig = (vals, vecs)
        return self._dip_eig

    def potential_max(self) -> float:
        if not self.pot:
            return 0.0
        vals, _ = self.potential_eig()
        return float(np.max(vals))

    def potential_min(self) -> float:
        if not self.pot:
            return 0.0
        vals, _ = self.potential_eig()
        return float(np.min(vals))


def assemble(
    grid: ProductGrid,
    n_channels: int = 1,
    pot=None,
    nip=None,
    dip_p=None,
    dip_t=None,
) -> SystemSpec:
    """Evaluate operator specs on the full DVR tensor and bundle them.

    Each entry may be an ndarray already on the grid, a callable of the
    coordinate meshes ``f(*meshes)``, or a pair ``(dof_index, f)`` for a
    one-dimensional model broadcast along one degree of freedom.
    """
    meshes = grid.meshes()

    def materialize(entry):
        if entry is None:
            return None
        if isinstance(entry, tuple) and len(entry) == 2 and callable(entry[1]):
            k, f = entry
            if not 0 <= k < grid.ndim:
                raise ConfigurationError(f"dof index {k} out of range")
            return np.broadcast_to(f(meshes[k]), grid.shape).astype(float).copy()
        if callable(entry):
            return np.broadcast_to(entry(*meshes), grid.shape).astype(float).copy()
        arr = np.asarray(entry, dtype=float)
        if arr.shape != grid.shape:
            raise ShapeError(f"operator grid shape {arr.shape} != {grid.shape}")
        return arr

    def normalize_key(key, symmetric_upper):
        i, j = key
        if symmetric_upper and i > j:
            i, j = j, i
        return (i, j)

    pot_grids = {}
    for key, entry in (pot or {}).items():
        k = normalize_key(key, True)
        if k in pot_grids:
            raise ConfigurationError(f"duplicate potential entry for channels {k}")
        pot_grids[k] = materialize(entry)
    dip_t_grids = {}
    for key, entry in (dip_t or {}).items():
        k = normalize_key(key, True)
        if k[0] == k[1]:
            raise ConfigurationError("dip_t entries must be off-diagonal")
        if k in dip_t_grids:
            raise ConfigurationError(f"duplicate dip_t entry for channels {k}")
        dip_t_grids[k] = materialize(entry)
    dip_p_grids = {i: materialize(e) for i, e in (dip_p or {}).items()}

    return SystemSpec(
        grid=grid,
        n_channels=n_channels,
        pot=pot_grids,
        nip=materialize(nip),
        dip_p=dip_p_grids,
        dip_t=dip_t_grids,
    )


def apply_hamiltonian(sys: SystemSpec, psi: WaveFunction, field_value=0.0) -> WaveFunction:
    """(T + V - F mu) psi, channelwise.  The NIP is deliberately excluded."""
    if psi.grid.shape != sys.grid.shape:
        raise ShapeError("wavefunction grid does not match system grid")
    nu = sys.n_channels
    out = [np.zeros(sys.grid.shape, dtype=complex) for _ in range(nu)]
    for c in range(nu):
        for axis, g in enumerate(sys.grid.dofs):
            out[c] += g.apply_kinetic(psi.channels[c], axis=axis)
    for (i, j), v in sys.pot.items():
        out[i] += v * psi.channels[j]
        if i != j:
            out[j] += v * psi.channels[i]
    if field_value:
        for i, v in sys.dip_p.items():
            out[i] -= field_value * v * psi.channels[i]
        for (i, j), v in sys.dip_t.items():
            out[i] -= field_value * v * psi.channels[j]
            out[j] -= field_value * v * psi.channels[i]
    return WaveFunction(out, psi.grid)


def adiabatic_transform(sys: SystemSpec, psi: WaveFunction):
    """Pointwise diagonalization of the potential matrix.

    Returns ``(surfaces, psi_adi)`` where ``surfaces`` has shape
    grid.shape + (nu,) with eigenvalues ascending, and ``psi_adi`` holds the
    rotated channel amplitudes.  Eigenvector signs are fixed so the first
    component of significant magnitude is positive.
    """
    if sys.n_channels == 1:
        log.warning("adiabatic_transform is a no-op for a single channel")
        v = sys.pot.get((0, 0))
        surfaces = (v if v is not None else np.zeros(sys.grid.shape))[..., None]
        return surfaces, psi.copy()
    vals, vecs = sys.potential_eig()
    vecs = _fix_eigvec_signs(vecs)
    stacked = np.stack(psi.channels, axis=-1)
    adi = np.einsum("...ij,...i->...j", np.conj(vecs), stacked)
    channels = [adi[..., n] for n in range(sys.n_channels)]
    return vals, WaveFunction(channels, psi.grid)


def _fix_eigvec_signs(vecs):
    """Flip eigenvector columns so their first non-negligible entry is > 0."""
    nu = vecs.shape[-1]
    scale = np.max(np.abs(vecs), axis=-2, keepdims=False)  # per column
    sign = np.zeros(vecs.shape[:-2] + (nu,))
    undecided = np.ones_like(sign, dtype=bool)
    for comp in range(nu):
        entry = vecs[..., comp, :]
        significant = undecided & (np.abs(entry) > 1e-12 * scale)
        sign = np.where(significant, np.sign(entry), sign)
        undecided &= ~significant
    sign = np.where(sign == 0, 1.0, sign)
    return vecs * sign[..., None, :]


# -- initial states ---------------------------------------------------------


def init_gauss(grid: Grid1D, pos_0, width, momentum_0=0.0) -> np.ndarray:
    """Normalized Gaussian exp(-((x-x0)/(2w))^2) exp(i p0 x) on one dof."""
    if width <= 0:
        raise ConfigurationError(f"width must be positive, got {width}")
    x = grid.points
    amp = np.exp(-(((x - pos_0) / (2.0 * width)) ** 2)).astype(complex)
    amp *= np.exp(1j * momentum_0 * x)
    return _normalize_1d(amp, grid)


def morse_bound_count(d_e, alf, mass) -> int:
    lam = np.sqrt(2.0 * mass * d_e) / alf
    return int(np.floor(lam - 0.5)) + 1


def morse_energy(d_e, alf, mass, n) -> float:
    """Analytic Morse level: w0 (n + 1/2) - w0^2 (n + 1/2)^2 / (4 D_e)."""
    w0 = alf * np.sqrt(2.0 * d_e / mass)
    v = n + 0.5
    return float(w0 * v - (w0 * v) ** 2 / (4.0 * d_e))


def init_morse_eigenstate(grid: Grid1D, d_e, r_e, alf, mass, n=0) -> np.ndarray:
    """Analytic Morse eigenfunction (associated-Laguerre form), normalized."""
    lam = np.sqrt(2.0 * mass * d_e) / alf
    if not 0 <= n < lam - 0.5:
        raise ConfigurationError(
            f"Morse state n={n} outside bound range (lambda={lam:.4f})"
        )
    z = 2.0 * lam * np.exp(-alf * (grid.points - r_e))
    a = 2.0 * lam - 2.0 * n - 1.0
    # laguerre polynomial L_n^{(a)}(z) by the stable three-term recurrence
    lag_prev = np.ones_like(z)
    lag = 1.0 + a - z
    if n == 0:
        lag = lag_prev
    else:
        for k in range(1, n):
            lag, lag_prev = (
                ((2 * k + 1 + a - z) * lag - (k + a) * lag_prev) / (k + 1),
                lag,
            )
    with np.errstate(over="ignore"):
        amp = np.exp((lam - n - 0.5) * np.log(z) - z / 2.0) * lag
    if not np.all(np.isfinite(amp)):
        raise ConfigurationError(
            "Morse eigenfunction overflows on this grid; shrink the grid range"
        )
    return _normalize_1d(amp.astype(complex), grid)


def product_state(amplitudes, grid: ProductGrid, channel=0, n_channels=1) -> WaveFunction:
    """Outer product of per-dof amplitudes placed in one channel, normalized."""
    if len(amplitudes) != grid.ndim:
        raise ShapeError(
            f"got {len(amplitudes)} 1-D amplitudes for a {grid.ndim}-dof grid"
        )
    if not 0 <= channel < n_channels:
        raise ConfigurationError(f"channel {channel} out of range (nu={n_channels})")
    tensor = np.asarray(amplitudes[0], dtype=complex)
    for amp in amplitudes[1:]:
        tensor = np.multiply.outer(tensor, np.asarray(amp, dtype=complex))
    channels = [np.zeros(grid.shape, dtype=complex) for _ in range(n_channels)]
    channels[channel] = tensor
    return WaveFunction(channels, grid).normalize()


def _normalize_1d(amp, grid: Grid1D):
    norm = np.sqrt(np.sum(grid.weights * np.abs(amp) ** 2))
    if norm == 0:
        raise ConfigurationError("initial amplitude vanishes on the whole grid")
    return amp / norm
