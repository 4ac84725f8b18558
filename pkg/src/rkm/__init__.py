"""Randomized Kaczmarz iterations for linear inverse problems.

Cyclic and randomized Kaczmarz, the variance-reduced variant (RKMVR) and
Landweber iteration, together with exact finite-sum oracles for the
frequency-band error recursions of randomized Kaczmarz.
"""

from rkm.errors import ConfigError, InputError
from rkm.linalg import (
    FrequencySplit,
    SpectralConstants,
    SvdBasis,
    multi_band_project,
    row_probabilities,
    spectral_constants,
    svd,
)
from rkm.problems import (
    LinearSystem,
    NoisyObservation,
    add_noise,
    make_circle,
    make_problem,
    random_solution,
)

__all__ = [
    "ConfigError",
    "InputError",
    "FrequencySplit",
    "SpectralConstants",
    "SvdBasis",
    "multi_band_project",
    "row_probabilities",
    "spectral_constants",
    "svd",
    "LinearSystem",
    "NoisyObservation",
    "add_noise",
    "make_circle",
    "make_problem",
    "random_solution",
]

__version__ = "0.1.0"
