import numpy as np
import pytest

from qdynkit.grids import ProductGrid, build_fft_grid
from qdynkit.operators import MorseParams, eval_morse
from qdynkit.system import assemble

# OH-stretch Morse parameters used across the suite (atomic units)
MORSE = dict(d_e=0.1994, r_e=1.821, alf=1.189)
MASS = 1728.539


@pytest.fixture(scope="session")
def morse_grid():
    return build_fft_grid(256, 0.7, 10.0, MASS)


@pytest.fixture(scope="session")
def morse_sys(morse_grid):
    p = MorseParams(**MORSE)
    return assemble(
        ProductGrid((morse_grid,)),
        1,
        pot={(0, 0): (0, lambda r: eval_morse(p, r))},
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
