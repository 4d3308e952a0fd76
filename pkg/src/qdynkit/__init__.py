"""qdynkit: quantum dynamics of small systems on direct-product grids.

Library layers:

- :mod:`qdynkit.grids` — 1-D pseudospectral grids (fft, hermite, legendre)
  and their direct products.
- :mod:`qdynkit.operators` — analytic potential/dipole/absorber models.
- :mod:`qdynkit.system` — wavefunctions, Hamiltonian assembly, initial states.
- :mod:`qdynkit.propagators` — real- and imaginary-time propagation.
- :mod:`qdynkit.stationary` — direct matrix diagonalization for bound states.
- :mod:`qdynkit.observe` — expectation values, spectra, Wigner transforms,
  probability flux, reduced densities.
- :mod:`qdynkit.checkpoint` — chunked binary wavefunction snapshots.
- :mod:`qdynkit.config` / :mod:`qdynkit.cli` — TOML-driven batch runs.
"""

from .errors import (
    CheckpointError,
    ConfigurationError,
    NumericError,
    QdynError,
    RangeError,
    ResourceError,
    ShapeError,
    UnsupportedError,
)
from .grids import (
    Grid1D,
    ProductGrid,
    build_fft_grid,
    build_hermite_grid,
    build_legendre_grid,
    kinetic_matrix_dvr,
)
from .observe import (
    ExpectationRecord,
    expect,
    flux,
    level_populations,
    reduced_density,
    spectrum,
    wigner,
)
from .propagators import (
    ChebyParams,
    Pulse,
    TimeGrid,
    cheby_coefficients,
    propagate,
    relax,
    relax_excited,
    spectral_bounds,
)
from .stationary import EigenResult, build_matrix, expectations_bound, solve_bound_states
from .system import (
    SystemSpec,
    WaveFunction,
    adiabatic_transform,
    apply_hamiltonian,
    assemble,
    init_gauss,
    init_morse_eigenstate,
    morse_bound_count,
    morse_energy,
    product_state,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "QdynError", "ConfigurationError", "ShapeError", "NumericError",
    "RangeError", "ResourceError", "UnsupportedError", "CheckpointError",
    # grids
    "Grid1D", "ProductGrid", "build_fft_grid", "build_hermite_grid",
    "build_legendre_grid", "kinetic_matrix_dvr",
    # system
    "SystemSpec", "WaveFunction", "assemble", "apply_hamiltonian",
    "adiabatic_transform", "init_gauss", "init_morse_eigenstate",
    "morse_energy", "morse_bound_count", "product_state",
    # propagation
    "TimeGrid", "Pulse", "ChebyParams", "cheby_coefficients",
    "spectral_bounds", "propagate", "relax", "relax_excited",
    # stationary
    "EigenResult", "build_matrix", "solve_bound_states", "expectations_bound",
    # observables
    "ExpectationRecord", "expect", "spectrum", "wigner", "flux",
    "reduced_density", "level_populations",
]
