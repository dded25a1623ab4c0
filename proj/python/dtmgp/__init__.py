"""Sparse hierarchical expansions of deep tensor Markov Gaussian processes."""

from ._core import (
    ConfigError,
    Error,
    FormatError,
    IoError,
    NumericalError,
    Regressor,
    StructuralError,
    features,
    inverse_cholesky,
    ks_two_sample,
    midpoint_lattice,
    sparse_grid,
    sparse_grid_size,
    variance_gap,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "IoError",
    "NumericalError",
    "Regressor",
    "StructuralError",
    "features",
    "inverse_cholesky",
    "ks_two_sample",
    "midpoint_lattice",
    "sparse_grid",
    "sparse_grid_size",
    "variance_gap",
]
