"""One-dimensional DVR/FBR grids and their direct products.

Three grid kinds are supported:

- ``fft``: equidistant points with a plane-wave FBR; transforms are unitary
  discrete Fourier transforms and the default kinetic operator is
  ``k^2/(2M)`` on the discrete frequency ladder.
- ``hermite``: Gauss-Hermite points for harmonic-oscillator-like problems;
  the FBR consists of harmonic oscillator eigenfunctions and the kinetic
  operator is a tridiagonal matrix in that basis.
- ``legendre``: Gauss-Legendre points in cos(theta) for rotational problems;
  the FBR consists of normalized associated Legendre functions and the
  kinetic operator is ``l(l+1)/(2 M R^2)``.

All transforms are exactly unitary in the weighted sense, i.e. Parseval
holds between ``sum_i w_i |psi(R_i)|^2`` and ``sum_n |c_n|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from .errors import ConfigurationError, ShapeError

__all__ = [
    "Grid1D",
    "ProductGrid",
    "build_fft_grid",
    "build_hermite_grid",
    "build_legendre_grid",
    "dvr_to_fbr",
    "fbr_to_dvr",
    "apply_kinetic",
    "kinetic_matrix_dvr",
]


@dataclass(frozen=True)
class Grid1D:
    """A single degree of freedom: DVR points/weights and the FBR machinery.

    Attributes
    ----------
    kind : {"fft", "hermite", "legendre"}
    n_pts : int
    points : ndarray
        DVR nodes (position, or cos(theta) for legendre), strictly increasing.
    weights : ndarray
        Positive DVR quadrature weights; for hermite these absorb the
        Gaussian weight function so wavefunctions are plain amplitudes.
    mass : float
    kinetic_spectrum : ndarray or None
        Diagonal FBR kinetic eigenvalues (fft, legendre).
    kinetic_fbr : ndarray or None
        Non-diagonal FBR kinetic matrix (hermite).
    transform : ndarray or None
        Orthogonal matrix O with O[n, i] = sqrt(w_i) P_n(R_i); None for fft,
        where the unitary FFT takes its place.
    """

    kind: str
    n_pts: int
    points: np.ndarray
    weights: np.ndarray
    mass: float
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    omega: Optional[float] = None
    r_e: Optional[float] = None
    m_quantum: Optional[int] = None
    radius: Optional[float] = None
    kinetic_spectrum: Optional[np.ndarray] = field(default=None, repr=False)
    kinetic_fbr: Optional[np.ndarray] = field(default=None, repr=False)
    transform: Optional[np.ndarray] = field(default=None, repr=False)
    fbr_momenta: Optional[np.ndarray] = field(default=None, repr=False)

    # -- transforms ---------------------------------------------------------

    def to_fbr(self, values, axis=0):
        """DVR values -> FBR coefficients along `axis` of an nd tensor."""
        values = np.asarray(values)
        if values.shape[axis] != self.n_pts:
            raise ShapeError(
                f"expected {self.n_pts} points along axis {axis}, "
                f"got {values.shape[axis]}"
            )
        if self.kind == "fft":
            dx = self.weights[0]
            return np.fft.fft(values, axis=axis, norm="ortho") * np.sqrt(dx)
        weighted = _mul_along(values, np.sqrt(self.weights), axis)
        return _matmul_along(self.transform, weighted, axis)

    def from_fbr(self, coeffs, axis=0):
        """FBR coefficients -> DVR values along `axis` of an nd tensor."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[axis] != self.n_pts:
            raise ShapeError(
                f"expected {self.n_pts} coefficients along axis {axis}, "
                f"got {coeffs.shape[axis]}"
            )
        if self.kind == "fft":
            dx = self.weights[0]
            return np.fft.ifft(coeffs, axis=axis, norm="ortho") / np.sqrt(dx)
        values = _matmul_along(self.transform.T, coeffs, axis)
        return _mul_along(values, 1.0 / np.sqrt(self.weights), axis)

    def apply_kinetic(self, values, axis=0, clip=None):
        """Apply the default kinetic operator along `axis`.

        `clip` optionally caps the kinetic spectrum (used by spectral
        truncation in the Chebychev propagator).
        """
        values = np.asarray(values)
        if values.shape[axis] != self.n_pts:
            raise ShapeError(
                f"expected {self.n_pts} points along axis {axis}, "
                f"got {values.shape[axis]}"
            )
        if self.kind == "fft":
            spec = self.kinetic_spectrum
            if clip is not None:
                spec = np.minimum(spec, clip)
            c = np.fft.fft(values, axis=axis)
            return np.fft.ifft(_mul_along(c, spec, axis), axis=axis)
        c = self.to_fbr(values, axis)
        if self.kind == "hermite":
            kin = self.kinetic_fbr
            if clip is not None:
                kin = _clip_symmetric(kin, clip)
            c = _matmul_along(kin, c, axis)
        else:
            spec = self.kinetic_spectrum
            if clip is not None:
                spec = np.minimum(spec, clip)
            c = _mul_along(c, spec, axis)
        return self.from_fbr(c, axis)

    def kinetic_max(self) -> float:
        """Largest eigenvalue of the default kinetic operator."""
        if self.kind == "hermite":
            return float(np.linalg.eigvalsh(self.kinetic_fbr)[-1])
        return float(np.max(self.kinetic_spectrum))

    def kinetic_phase(self, dt, clip=None):
        """Diagonal FBR factors exp(-i T dt); hermite returns a matrix."""
        if self.kind == "hermite":
            kin = self.kinetic_fbr
            if clip is not None:
                kin = _clip_symmetric(kin, clip)
            vals, vecs = np.linalg.eigh(kin)
            return (vecs * np.exp(-1j * vals * dt)) @ vecs.T
        spec = self.kinetic_spectrum
        if clip is not None:
            spec = np.minimum(spec, clip)
        return np.exp(-1j * spec * dt)


@dataclass(frozen=True)
class ProductGrid:
    """Direct product of one-dimensional grids."""

    dofs: tuple

    def __post_init__(self):
        object.__setattr__(self, "dofs", tuple(self.dofs))
        if not self.dofs:
            raise ConfigurationError("product grid needs at least one dof")

    @property
    def shape(self):
        return tuple(g.n_pts for g in self.dofs)

    @property
    def ndim(self):
        return len(self.dofs)

    @property
    def total_points(self):
        return int(np.prod(self.shape))

    def meshes(self):
        """ndgrid-style coordinate tensors, one per dof."""
        return np.meshgrid(*(g.points for g in self.dofs), indexing="ij")

    def weight_tensor(self):
        w = self.dofs[0].weights
        for g in self.dofs[1:]:
            w = np.multiply.outer(w, g.weights)
        return w


# -- constructors -----------------------------------------------------------


def build_fft_grid(n_pts, x_min, x_max, mass) -> Grid1D:
    """Equidistant periodic grid with a plane-wave FBR."""
    if n_pts < 2:
        raise ConfigurationError(f"n_pts must be >= 2, got {n_pts}")
    if not x_max > x_min:
        raise ConfigurationError(f"x_max must exceed x_min ({x_min} .. {x_max})")
    if not mass > 0:
        raise ConfigurationError(f"mass must be positive, got {mass}")
    dx = (x_max - x_min) / n_pts
    points = x_min + dx * np.arange(n_pts)
    weights = np.full(n_pts, dx)
    k = 2.0 * np.pi * np.fft.fftfreq(n_pts, d=dx)
    return Grid1D(
        kind="fft",
        n_pts=n_pts,
        points=points,
        weights=weights,
        mass=mass,
        x_min=x_min,
        x_max=x_max,
        kinetic_spectrum=k**2 / (2.0 * mass),
        fbr_momenta=k,
    )


def build_hermite_grid(n_pts, mass, omega, r_e) -> Grid1D:
    """Gauss-Hermite grid; FBR = harmonic oscillator eigenfunctions."""
    if n_pts < 1:
        raise ConfigurationError(f"n_pts must be >= 1, got {n_pts}")
    if not (mass > 0 and omega > 0):
        raise ConfigurationError("mass and omega must be positive")
    xi, wg = hermgauss(n_pts)
    if not np.all(np.isfinite(xi)):
        raise FloatingPointError(f"Gauss-Hermite nodes failed for n_pts={n_pts}")
    scale = np.sqrt(mass * omega)
    points = r_e + xi / scale
    # DVR weights absorb the Gaussian weight so sum_i w_i f(R_i) ~ int f dR
    weights = wg * np.exp(xi**2) / scale

    # normalized Hermite functions h_n(xi), unit-normalized over dR
    h = np.zeros((n_pts, n_pts))
    h[0] = np.pi**-0.25 * np.exp(-0.5 * xi**2)
    if n_pts > 1:
        h[1] = np.sqrt(2.0) * xi * h[0]
    for n in range(2, n_pts):
        h[n] = np.sqrt(2.0 / n) * xi * h[n - 1] - np.sqrt((n - 1) / n) * h[n - 2]
    basis = np.sqrt(scale) * h  # phi_n(R_i)
    transform = _orthonormalize(basis * np.sqrt(weights))

    # Kinetic operator as (oscillator Hamiltonian) - (quadrature harmonic
    # potential).  Analytically this equals the tridiagonal p^2/2M matrix;
    # writing it as a difference makes the finite-order quadrature error of
    # the potential cancel exactly for harmonic problems, so oscillator
    # eigenvalues come out at machine precision for every basis state.
    n = np.arange(n_pts)
    v_quad = transform @ np.diag(
        0.5 * mass * omega**2 * (points - r_e) ** 2
    ) @ transform.T
    kin = np.diag(omega * (n + 0.5)) - v_quad
    kin = 0.5 * (kin + kin.T)
    return Grid1D(
        kind="hermite",
        n_pts=n_pts,
        points=points,
        weights=weights,
        mass=mass,
        omega=omega,
        r_e=r_e,
        kinetic_fbr=kin,
        transform=transform,
    )


def build_legendre_grid(n_pts, mass, radius, m_quantum=0) -> Grid1D:
    """Gauss-Legendre grid in cos(theta); FBR = associated Legendre P_l^m."""
    if n_pts < 1:
        raise ConfigurationError(f"n_pts must be >= 1, got {n_pts}")
    if not (mass > 0 and radius > 0):
        raise ConfigurationError("mass and radius must be positive")
    if m_quantum < 0:
        raise ConfigurationError(f"m_quantum must be >= 0, got {m_quantum}")
    points, weights = leggauss(n_pts)
    basis = _assoc_legendre_normalized(m_quantum, n_pts, points)
    transform = _orthonormalize(basis * np.sqrt(weights))
    ell = m_quantum + np.arange(n_pts)
    spectrum = ell * (ell + 1) / (2.0 * mass * radius**2)
    return Grid1D(
        kind="legendre",
        n_pts=n_pts,
        points=points,
        weights=weights,
        mass=mass,
        radius=radius,
        m_quantum=m_quantum,
        kinetic_spectrum=spectrum,
        transform=transform,
    )


# -- free-function facade ---------------------------------------------------


def dvr_to_fbr(grid: Grid1D, values):
    return grid.to_fbr(values)


def fbr_to_dvr(grid: Grid1D, coeffs):
    return grid.from_fbr(coeffs)


def apply_kinetic(grid: Grid1D, values):
    return grid.apply_kinetic(values)


def kinetic_matrix_dvr(grid: Grid1D) -> np.ndarray:
    """DVR matrix of the default kinetic operator, U^T diag(spectrum) U.

    The matrix lives in the weight-orthonormal DVR basis: it acts on
    ``sqrt(w_i) psi(R_i)``.  For fft grids the weights are uniform, so the
    matrix also acts directly on plain amplitudes.
    """
    if grid.kind == "fft":
        u = np.fft.fft(np.eye(grid.n_pts), axis=0, norm="ortho")
        t = (u.conj().T * grid.kinetic_spectrum) @ u
        t = np.real(t)
    elif grid.kind == "hermite":
        t = grid.transform.T @ grid.kinetic_fbr @ grid.transform
    else:
        t = (grid.transform.T * grid.kinetic_spectrum) @ grid.transform
    return 0.5 * (t + t.T)


# -- helpers ----------------------------------------------------------------


def _mul_along(tensor, vec, axis):
    shape = [1] * tensor.ndim
    shape[axis] = -1
    return tensor * vec.reshape(shape)


def _matmul_along(matrix, tensor, axis):
    out = np.tensordot(matrix, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _orthonormalize(o):
    """Loewdin-symmetric correction; a no-op up to roundoff for exact rules."""
    s = o @ o.T
    vals, vecs = np.linalg.eigh(s)
    if np.any(vals <= 0):
        raise FloatingPointError("FBR quadrature matrix is numerically singular")
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
    return inv_sqrt @ o


def _clip_symmetric(mat, cap):
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.minimum(vals, cap)) @ vecs.T


def _assoc_legendre_normalized(m, n_rows, x):
    """Rows P~_l^m(x) for l = m .. m+n_rows-1, unit-normalized on (-1, 1)."""
    out = np.zeros((n_rows, len(x)))
    # seed: P~_m^m, with log-space prefactor for large m
    log_norm = 0.5 * (
        np.log(2 * m + 1.0) - np.log(2.0) + gammaln(1.0) - gammaln(2.0 * m + 1.0)
    )
    log_dfact = gammaln(2.0 * m + 1.0) - m * np.log(2.0) - gammaln(m + 1.0)
    sign = (-1.0) ** m
    with np.errstate(divide="ignore"):
        log_s = 0.5 * m * np.log1p(-(x**2))
    pmm = sign * np.exp(log_norm + log_dfact + log_s)
    out[0] = pmm
    if n_rows == 1:
        return out
    l1 = m + 1
    a1 = np.sqrt((2.0 * l1 + 1) * (2.0 * l1 - 1) / ((l1 - m) * (l1 + m)))
    out[1] = a1 * x * out[0]
    for i in range(2, n_rows):
        l = m + i
        a = np.sqrt((4.0 * l**2 - 1) / (l**2 - m**2))
        b = np.sqrt(
            (2.0 * l + 1)
            * (l - 1.0 + m)
            * (l - 1.0 - m)
            / ((2.0 * l - 3) * (l**2 - m**2))
        )
        out[i] = a * x * out[i - 1] - b * out[i - 2]
    return out
