"""Randomized linear gradient compression: compressors, Q-seminorms, bounds, experiments."""

__version__ = "0.1.0"

from .compressors import (CompressorSample, CompressorSpec, Scheme, apply_projection, compress,
                          decompress, empirical_second_moment, make_rng, sample)
from .qnorm import (check_omega_consistency, exact_second_moment, omega_of, qnorm_exact, qnorm_mc,
                    spectral_norm)

__all__ = [
    "CompressorSample",
    "CompressorSpec",
    "Scheme",
    "apply_projection",
    "compress",
    "decompress",
    "empirical_second_moment",
    "make_rng",
    "sample",
    "check_omega_consistency",
    "exact_second_moment",
    "omega_of",
    "qnorm_exact",
    "qnorm_mc",
    "spectral_norm",
]
