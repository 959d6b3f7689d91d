"""Minkowski four-vectors, dispersion relations and the noise-model scalars.

Signature is (+, -, -, -) throughout and the mass is always carried as its
square ``xi``.  Functions that take a three-momentum accept either a single
vector or an array of shape ``(..., 3)`` so the quadrature code can evaluate
whole node sets at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: constructors reject ``1 - 2*zeta0**2`` at or below this margin
ADMISSIBILITY_MARGIN = 1e-12


class DomainError(ValueError):
    """Raised for arguments outside the physical domain (negative xi, tau < 0, ...)."""


@dataclass(frozen=True)
class FourVector:
    t: float
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> "FourVector":
        a = np.asarray(a, dtype=float).ravel()
        if a.shape != (4,):
            raise ValueError(f"need 4 components, got shape {a.shape}")
        return cls(*(float(c) for c in a))

    @property
    def spatial(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def to_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z])

    def __add__(self, other: "FourVector") -> "FourVector":
        return FourVector(self.t + other.t, self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "FourVector") -> "FourVector":
        return FourVector(self.t - other.t, self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "FourVector":
        return FourVector(-self.t, -self.x, -self.y, -self.z)

    def __mul__(self, s: float) -> "FourVector":
        return FourVector(s * self.t, s * self.x, s * self.y, s * self.z)

    __rmul__ = __mul__

    def square(self) -> float:
        return minkowski_dot(self, self)


@dataclass(frozen=True)
class ZetaParams:
    """Noise coupling four-vector; requires ``1 - 2*zeta0**2 > 0``."""

    zeta: FourVector = FourVector(0.0)

    def __post_init__(self):
        if not isinstance(self.zeta, FourVector):
            object.__setattr__(self, "zeta", FourVector.from_array(self.zeta))
        if self.anisotropy_factor <= ADMISSIBILITY_MARGIN:
            raise DomainError(
                f"inadmissible zeta: 1 - 2*zeta0^2 = {self.anisotropy_factor!r} "
                f"(must exceed {ADMISSIBILITY_MARGIN})"
            )

    @classmethod
    def of(cls, *components: float) -> "ZetaParams":
        if len(components) == 1 and not np.isscalar(components[0]):
            return cls(FourVector.from_array(components[0]))
        return cls(FourVector(*components))

    @property
    def anisotropy_factor(self) -> float:
        """``1 - 2*zeta0**2``."""
        return 1.0 - 2.0 * self.zeta.t ** 2

    @property
    def is_zero(self) -> bool:
        return self.zeta == FourVector(0.0)

    @property
    def is_spatially_zero(self) -> bool:
        return self.zeta.x == 0.0 and self.zeta.y == 0.0 and self.zeta.z == 0.0


def minkowski_dot(a: FourVector, b: FourVector) -> float:
    return a.t * b.t - a.x * b.x - a.y * b.y - a.z * b.z


def in_positive_cone(k: FourVector) -> bool:
    return k.t > 0.0 and minkowski_dot(k, k) > 0.0


def _check_xi(xi):
    if np.any(np.asarray(xi) < 0):
        raise DomainError(f"xi must be >= 0 (mass squared), got {xi!r}")


def omega(kvec, xi):
    """On-shell energy ``sqrt(|k|^2 + xi)``.

    ``kvec`` may be a 3-vector or an array of shape ``(..., 3)``; ``xi`` may
    broadcast against the leading axes.  Negative ``xi`` raises
    :class:`DomainError`.
    """
    _check_xi(xi)
    k = np.asarray(kvec, dtype=float)
    out = np.sqrt(np.sum(k * k, axis=-1) + xi)
    return float(out) if np.ndim(out) == 0 else out


def lambda_noisy(k: FourVector, zeta: ZetaParams) -> float:
    """Diagonal Liouville eigenvalue ``2[k^2 - 2 (zeta.k)^2]``."""
    zk = minkowski_dot(zeta.zeta, k)
    return 2.0 * (minkowski_dot(k, k) - 2.0 * zk * zk)


def shell_weight(kvec, xi, zeta: ZetaParams):
    """``sqrt((1 - 2 zeta0^2)(|k|^2 + xi) + 2 (zeta_s . k)^2)``.

    Half the inverse Jacobian of the shifted mass shell with respect to the
    energy; reduces to ``omega`` when ``zeta`` vanishes.
    """
    _check_xi(xi)
    k = np.asarray(kvec, dtype=float)
    s = k @ zeta.zeta.spatial
    out = np.sqrt(zeta.anisotropy_factor * (np.sum(k * k, axis=-1) + xi) + 2.0 * s * s)
    return float(out) if np.ndim(out) == 0 else out


def varpi(kvec, xi, zeta: ZetaParams):
    """Positive frequency on the noise-shifted shell ``xi = K^2 - 2 (zeta.K)^2``.

    Closed-form positive root of the quadratic in the energy; vectorised over
    ``kvec`` like :func:`omega`.
    """
    _check_xi(xi)
    k = np.asarray(kvec, dtype=float)
    a = zeta.anisotropy_factor
    z0 = zeta.zeta.t
    s = k @ zeta.zeta.spatial
    disc = a * (np.sum(k * k, axis=-1) + xi + 2.0 * s * s) + (2.0 * z0 * s) ** 2
    assert np.all(disc >= 0.0), "negative discriminant under admissible zeta"
    out = (np.sqrt(disc) - 2.0 * z0 * s) / a
    return float(out) if np.ndim(out) == 0 else out


def shifted_mass_shell_residual(kvec, xi, zeta: ZetaParams) -> float:
    """``xi - [K^2 - 2 (zeta.K)^2]`` for ``K = (varpi, kvec)``."""
    k = np.asarray(kvec, dtype=float)
    K = FourVector(varpi(k, xi, zeta), *k)
    zK = minkowski_dot(zeta.zeta, K)
    return xi - (minkowski_dot(K, K) - 2.0 * zK * zK)


def rotate(v: FourVector, axis, angle: float) -> FourVector:
    """Rotate the spatial part of ``v`` about ``axis`` (Rodrigues)."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    s = v.spatial
    c, sn = math.cos(angle), math.sin(angle)
    r = s * c + np.cross(n, s) * sn + n * (n @ s) * (1 - c)
    return FourVector(v.t, *r)
