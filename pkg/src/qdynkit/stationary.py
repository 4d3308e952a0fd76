"""Bound states by explicit Hamiltonian-matrix diagonalization.

The field-free Hamiltonian ``T + V`` is materialized as a symmetric matrix
over all channels and grid points (Kronecker assembly of the per-dof kinetic
DVR blocks plus pointwise potential blocks) and diagonalized either densely
or, after thresholding small entries, with a sparse iterative solver.  The
absorber and any field coupling are deliberately excluded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConfigurationError, NumericError, ResourceError
from .grids import kinetic_matrix_dvr
from .system import SystemSpec, WaveFunction

__all__ = [
    "EigenResult",
    "build_matrix",
    "solve_bound_states",
    "expectations_bound",
    "DIM_CAP_DEFAULT",
]

DIM_CAP_DEFAULT = 2**16


@dataclass
class EigenResult:
    energies: np.ndarray
    states: List[WaveFunction]
    n_requested: int
    method: str  # "dense" | "sparse"


def build_matrix(sys: SystemSpec, sparsity_threshold=0.0, dim_cap=DIM_CAP_DEFAULT):
    """Symmetric Hamiltonian over (channel, grid point) in row-major order.

    The matrix acts on weight-scaled amplitudes ``sqrt(w) psi``; multiplying
    back by ``1/sqrt(w)`` recovers DVR amplitudes (a no-op for fft grids).
    Returns a dense ndarray for ``sparsity_threshold == 0`` and a CSR matrix
    otherwise, with entries of magnitude below the threshold dropped.
    """
    if sparsity_threshold < 0:
        raise ConfigurationError(
            f"sparsity_threshold must be >= 0, got {sparsity_threshold}"
        )
    grid = sys.grid
    npts = grid.total_points
    dim = sys.n_channels * npts
    if dim > dim_cap:
        raise ResourceError(
            f"Hamiltonian dimension {dim} exceeds the cap {dim_cap}; "
            "raise dim_cap explicitly to override"
        )

    # kinetic part, shared by every channel: sum_k 1 x ... x T_k x ... x 1
    t_total = np.zeros((npts, npts))
    for axis, g in enumerate(grid.dofs):
        t_axis = kinetic_matrix_dvr(g)
        left = int(np.prod(grid.shape[:axis], dtype=int))
        right = int(np.prod(grid.shape[axis + 1 :], dtype=int))
        t_total += np.kron(
            np.kron(np.eye(left), t_axis), np.eye(right)
        )

    h = np.zeros((dim, dim))
    for c in range(sys.n_channels):
        sl = slice(c * npts, (c + 1) * npts)
        h[sl, sl] += t_total
    for (i, j), v in sys.pot.items():
        flat = v.reshape(-1)
        rows = np.arange(npts)
        h[i * npts + rows, j * npts + rows] += flat
        if i != j:
            h[j * npts + rows, i * npts + rows] += flat
    h = 0.5 * (h + h.T)

    if sparsity_threshold > 0:
        h[np.abs(h) < sparsity_threshold] = 0.0
        return scipy.sparse.csr_matrix(h)
    return h


def solve_bound_states(
    sys: SystemSpec,
    n_stop,
    sparsity_threshold=0.0,
    dim_cap=DIM_CAP_DEFAULT,
) -> EigenResult:
    """Lowest ``n_stop + 1`` eigenpairs of the field-free Hamiltonian."""
    grid = sys.grid
    dim = sys.n_channels * grid.total_points
    if not 0 <= n_stop < dim:
        raise ConfigurationError(
            f"n_stop must lie in [0, {dim - 1}], got {n_stop}"
        )
    n_states = n_stop + 1
    h = build_matrix(sys, sparsity_threshold=sparsity_threshold, dim_cap=dim_cap)

    if scipy.sparse.issparse(h):
        method = "sparse"
        if n_states >= dim - 1:
            vals, vecs = scipy.linalg.eigh(h.toarray())
            vals, vecs = vals[:n_states], vecs[:, :n_states]
        else:
            try:
                vals, vecs = scipy.sparse.linalg.eigsh(h, k=n_states, which="SA")
            except scipy.sparse.linalg.ArpackNoConvergence as exc:
                raise NumericError(
                    "sparse eigensolver did not converge; retry with "
                    "sparsity_threshold=0 for the dense path"
                ) from exc
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
    else:
        method = "dense"
        vals, vecs = scipy.linalg.eigh(h, subset_by_index=(0, n_states - 1))

    w = grid.weight_tensor()
    sqrt_w = np.sqrt(w)
    states = []
    for n in range(n_states):
        u = vecs[:, n]
        peak = np.argmax(np.abs(u))
        if u[peak] < 0:
            u = -u
        u = u / np.linalg.norm(u)
        channels = [
            u[c * grid.total_points : (c + 1) * grid.total_points].reshape(
                grid.shape
            )
            / sqrt_w
            for c in range(sys.n_channels)
        ]
        states.append(WaveFunction(channels, grid))
    return EigenResult(
        energies=np.asarray(vals, dtype=float),
        states=states,
        n_requested=n_states,
        method=method,
    )


def expectations_bound(result: EigenResult, sys: SystemSpec):
    """Per-state expectation records (position, momentum, energies, ...)."""
    from .observe import expect

    return [expect(sys, psi, psi) for psi in result.states]
