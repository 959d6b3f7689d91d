"""Momentum-space quadrature rules shared by the propagator and positivity code."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

SCHEMES = ("gauss_legendre", "trapezoid")


@dataclass(frozen=True)
class QuadratureConfig:
    """Cutoff and node counts for the regularised ``d^3k`` / ``d^4k`` integrals.

    ``n_angular`` is the node count per angle (polar ``cos(theta)`` and
    azimuth).  ``n_energy`` is the node count of the inner energy integral in
    positive-cone ``d^4k`` integrals.  With ``collapse_isotropic`` the
    angular integral of isotropic integrands is done analytically, leaving a
    one-dimensional radial rule.
    """

    k_max: float = 8.0
    n_radial: int = 64
    n_angular: int = 16
    scheme: str = "gauss_legendre"
    n_energy: int = 64
    collapse_isotropic: bool = True

    def __post_init__(self):
        if not self.k_max > 0:
            raise ValueError(f"k_max must be positive, got {self.k_max!r}")
        for name in ("n_radial", "n_angular", "n_energy"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    def refined(self, factor: int = 2) -> "QuadratureConfig":
        return QuadratureConfig(
            self.k_max,
            self.n_radial * factor,
            self.n_angular * factor,
            self.scheme,
            self.n_energy * factor,
            self.collapse_isotropic,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def interval_rule(a: float, b: float, n: int, scheme: str = "gauss_legendre"):
    """Nodes and weights for ``int_a^b``."""
    if scheme == "gauss_legendre":
        x, w = leggauss(n)
        return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w
    x = np.linspace(a, b, n)
    w = np.full(n, (b - a) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def radial_rule(q: QuadratureConfig):
    return interval_rule(0.0, q.k_max, q.n_radial, q.scheme)


def sphere_rule(q: QuadratureConfig):
    """Tensor rule for the ball ``|k| <= k_max``.

    Returns ``(k, w)`` with ``k`` of shape ``(N, 3)``; the weights include
    the ``r^2`` Jacobian.  The azimuth uses the periodic trapezoid rule with
    an even node count so the node set is closed under ``k -> -k``.
    """
    r, wr = radial_rule(q)
    c, wc = interval_rule(-1.0, 1.0, q.n_angular, q.scheme)
    nphi = q.n_angular + (q.n_angular % 2)
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = np.full(nphi, 2.0 * np.pi / nphi)
    R, C, P = np.meshgrid(r, c, phi, indexing="ij")
    s = np.sqrt(1.0 - C * C)
    k = np.stack([R * s * np.cos(P), R * s * np.sin(P), R * C], axis=-1).reshape(-1, 3)
    w = (wr[:, None, None] * r[:, None, None] ** 2 * wc[None, :, None] * wphi[None, None, :]).ravel()
    return k, w


def energy_rule(kabs: np.ndarray, k0_max: float, q: QuadratureConfig):
    """Inner rule for ``int_{|k|}^{k0_max} dk0`` at each radial node.

    Returns arrays of shape ``(len(kabs), n_energy)``.
    """
    x, w = interval_rule(0.0, 1.0, q.n_energy, q.scheme)
    span = (k0_max - kabs)[:, None]
    return kabs[:, None] + span * x, span * w


def sinc(x):
    """``sin(x)/x`` (unnormalised)."""
    return np.sinc(np.asarray(x) / np.pi)
