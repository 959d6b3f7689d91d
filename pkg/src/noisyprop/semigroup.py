"""Tau-evolution on a finite momentum lattice.

Every operator involved is a function of the momentum operator, so in the
momentum eigenbasis all maps act on a coefficient matrix ``rho_ij`` (the
coefficient of ``|k_i><k_j|``) as entrywise multipliers.  With
``c_ij = zeta.k_i + zeta.k_j``:

* Liouville action: ``lambda_ij = k_i^2 + k_j^2 - c_ij^2``;
* Gaussian-averaged Kraus map: ``exp(tau c_ij^2)``;
* full step: ``exp(-lambda_ij tau)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .fields import ModeLattice
from .kinematics import DomainError, FourVector, ZetaParams, in_positive_cone, lambda_noisy, minkowski_dot

@dataclass(frozen=True)
class CoeffMatrix:
    lattice: np.ndarray   # (n, 4) positive-cone momenta
    rho: np.ndarray       # (n, n) complex

    def __post_init__(self):
        lat = np.asarray(self.lattice, dtype=float).reshape(-1, 4)
        rho = np.asarray(self.rho, dtype=complex)
        n = lat.shape[0]
        if rho.shape != (n, n):
            raise ValueError(f"rho has shape {rho.shape}, lattice has {n} momenta")
        for k in lat:
            if not in_positive_cone(FourVector.from_array(k)):
                raise DomainError(f"lattice momentum {k} is outside the positive cone")
        if len({tuple(k) for k in lat}) != n:
            raise ValueError("lattice momenta must be distinct")
        object.__setattr__(self, "lattice", lat)
        object.__setattr__(self, "rho", rho)

    def __len__(self) -> int:
        return self.lattice.shape[0]

    @property
    def momenta(self) -> list:
        return [FourVector.from_array(k) for k in self.lattice]

    @property
    def k_squared(self) -> np.ndarray:
        return np.array([minkowski_dot(k, k) for k in self.momenta])

    def zeta_dot(self, zeta: ZetaParams) -> np.ndarray:
        return np.array([minkowski_dot(zeta.zeta, k) for k in self.momenta])

    def with_rho(self, rho) -> "CoeffMatrix":
        return CoeffMatrix(self.lattice, rho)

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.rho - self.rho.conj().T) <= atol))

    def to_dict(self) -> dict:
        flat = self.rho.ravel()
        return {
            "lattice": self.lattice.tolist(),
            "rho": [[float(z.real), float(z.imag)] for z in flat],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CoeffMatrix":
        lat = np.asarray(d["lattice"], dtype=float).reshape(-1, 4)
        pairs = np.asarray(d["rho"], dtype=float).reshape(-1, 2)
        n = lat.shape[0]
        return cls(lat, (pairs[:, 0] + 1j * pairs[:, 1]).reshape(n, n))

    @classmethod
    def from_json(cls, text: str) -> "CoeffMatrix":
        return cls.from_dict(json.loads(text))


def mike_evolve(state: ModeLattice, tau: float) -> ModeLattice:
    """Multiply every amplitude by ``exp(-k^2 tau)``."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau!r}")
    if len(state) == 0:
        return state
    damp = np.exp(-state.k_squared * tau)
    return state.with_amplitudes(damp * state.particle, damp * state.antiparticle)


def density_from_state(state: ModeLattice) -> CoeffMatrix:
    """Rank-one ``|Phi><Phi|`` built from the particle amplitudes."""
    a = state.particle
    return CoeffMatrix(state.momenta, np.outer(a, np.conj(a)))


def liouville_factors(rho: CoeffMatrix, zeta: ZetaParams) -> np.ndarray:
    """``lambda_ij``; the diagonal is taken from :func:`lambda_noisy` itself."""
    k2 = rho.k_squared
    c = rho.zeta_dot(zeta)
    lam = k2[:, None] + k2[None, :] - (c[:, None] + c[None, :]) ** 2
    diag = [lambda_noisy(k, zeta) for k in rho.momenta]
    lam[np.diag_indices_from(lam)] = diag
    return lam


def liouville_apply(rho: CoeffMatrix, zeta: ZetaParams) -> CoeffMatrix:
    return rho.with_rho(liouville_factors(rho, zeta) * rho.rho)


def kraus_average(c, tau: float, order: int | None = None):
    """Average of ``exp(-u c sqrt(tau))`` over ``exp(-u^2/4) du / (2 sqrt(pi))``.

    ``order=None`` returns the closed form ``exp(c^2 tau)``; otherwise a
    Gauss-Hermite rule of that order is used after ``u = 2v``.
    """
    c = np.asarray(c, dtype=float)
    if order is None:
        return np.exp(c * c * tau)
    v, w = hermgauss(order)
    a = c[..., None] * math.sqrt(tau)
    return np.sum(w * np.exp(-2.0 * v * a), axis=-1) / math.sqrt(math.pi)


def gaussian_kraus_map(rho: CoeffMatrix, zeta: ZetaParams, tau: float,
                       mode: str = "closed_form", order: int = 60) -> CoeffMatrix:
    """Gaussian-averaged conjugation by ``exp(-u zeta.k sqrt(tau))``.

    ``mode`` is ``"closed_form"`` or ``"quadrature"`` (Gauss-Hermite of the
    given ``order``).
    """
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau!r}")
    if mode not in ("closed_form", "quadrature"):
        raise ValueError(f"unknown mode {mode!r}")
    z = rho.zeta_dot(zeta)
    c = z[:, None] + z[None, :]
    factor = kraus_average(c, tau, None if mode == "closed_form" else order)
    return rho.with_rho(factor * rho.rho)


def nested_anticommutator(rho: CoeffMatrix, zeta: ZetaParams) -> CoeffMatrix:
    """``[zeta.k, [zeta.k, rho]_+]_+`` in the momentum basis."""
    z = rho.zeta_dot(zeta)
    return rho.with_rho((z[:, None] + z[None, :]) ** 2 * rho.rho)


def full_semigroup_step(rho: CoeffMatrix, zeta: ZetaParams, tau: float) -> CoeffMatrix:
    """Solution of ``d rho/d tau = -L(rho)`` after ``tau``: entries times ``exp(-lambda_ij tau)``."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau!r}")
    return rho.with_rho(np.exp(-liouville_factors(rho, zeta) * tau) * rho.rho)


def free_damping(rho: CoeffMatrix, tau: float) -> CoeffMatrix:
    """Entries times ``exp(-(k_i^2 + k_j^2) tau)``."""
    k2 = rho.k_squared
    return rho.with_rho(np.exp(-(k2[:, None] + k2[None, :]) * tau) * rho.rho)


def stable_mask(rho: CoeffMatrix, zeta: ZetaParams) -> np.ndarray:
    lam = np.array([lambda_noisy(k, zeta) for k in rho.momenta])
    return (lam > 0.0) & (rho.lattice[:, 0] > 0.0)


def stability_filter(rho: CoeffMatrix, zeta: ZetaParams) -> CoeffMatrix:
    """Zero the rows and columns of momenta with ``lambda(k) <= 0`` or ``k^0 <= 0``."""
    m = stable_mask(rho, zeta)
    return rho.with_rho(rho.rho * np.outer(m, m))


def von_neumann_residual(state: ModeLattice, tau: float, h: float,
                         exact_derivative: bool = False) -> float:
    """Max-norm of ``d rho/d tau + [k^2, rho]_+`` for ``rho = |Phi(tau)><Phi(tau)|``.

    Particle and antiparticle amplitudes are stacked into one coefficient
    vector (both carry ``k^2``).  The derivative is a central difference with
    step ``h`` unless ``exact_derivative`` substitutes the analytic one.
    """
    if not (tau > 0 and h > 0):
        raise DomainError("tau and h must be positive")
    if len(state) == 0:
        return 0.0
    k2 = np.concatenate([state.k_squared, state.k_squared])
    amp = np.concatenate([state.particle, state.antiparticle])

    def rho_at(s):
        v = amp * np.exp(-k2 * s)
        return np.outer(v, np.conj(v))

    anti = (k2[:, None] + k2[None, :]) * rho_at(tau)
    if exact_derivative:
        deriv = -anti
    else:
        deriv = (rho_at(tau + h) - rho_at(tau - h)) / (2.0 * h)
    return float(np.max(np.abs(deriv + anti)))
