"""Numerical toolkit for variable-mass scalar fields, their propagators and tau-evolution."""

__version__ = "0.1.0"

from .kinematics import DomainError, FourVector, ZetaParams, lambda_noisy, omega, varpi
from .propagators import KernelSpec, feynman, noisy_feynman, phi_tau_kernel, wightman
from .quadrature import QuadratureConfig
from .spectral import SpectralMeasure

__all__ = [
    "DomainError",
    "FourVector",
    "KernelSpec",
    "QuadratureConfig",
    "SpectralMeasure",
    "ZetaParams",
    "feynman",
    "lambda_noisy",
    "noisy_feynman",
    "omega",
    "phi_tau_kernel",
    "varpi",
    "wightman",
]
