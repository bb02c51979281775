"""Pseudospectral solver and verification suite for 2-D MHD around the equilibrium (0, e1)."""

from mhd2d.spectral import (
    Grid,
    SpectralField,
    VectorField,
    differentiate,
    divergence,
    inner,
    lambda_s,
    leray_project,
    mollify,
    norm,
)
from mhd2d.state import MHDState

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "MHDState",
    "differentiate",
    "divergence",
    "inner",
    "lambda_s",
    "leray_project",
    "mollify",
    "norm",
]
