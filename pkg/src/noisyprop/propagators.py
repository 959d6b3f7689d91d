"""Two-point kernels evaluated as regularised momentum-space mode sums.

Every shell kernel here has the form

    I(dx) = int_{|k| <= k_max} d^3k  W(k) exp(-i [Omega(k) dt - k . dx_s])

with a positive weight ``W`` and positive frequency ``Omega``.  The
Wightman function is ``I`` itself; time-ordered kernels pick ``I(dx)`` for
``dt > 0`` and ``I(-dx)`` for ``dt < 0`` (the conjugate branch), and average
the two at equal times.  No i*epsilon prescription is used.

Positive-cone kernels integrate the energy explicitly over
``(|k|, sqrt(k_max^2 + xi_max)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import DomainError, FourVector, ZetaParams, omega, shell_weight, varpi
from .quadrature import QuadratureConfig, energy_rule, radial_rule, sinc, sphere_rule
from .spectral import SpectralMeasure, laplace_forward

TWO_PI = 2.0 * math.pi

#: noisy/free ratio at zeta = 0 implied by the two normalisations,
#: (2pi)^{-3/2}/omega  over  (2pi)^{-3}/(2 omega)
ZETA0_RATIO = 2.0 * TWO_PI ** 1.5

KINDS = (
    "wightman",
    "feynman",
    "phi_tau",
    "noisy_feynman",
    "commutator_fixed_mass",
    "commutator_cutoff",
)

_CHUNK = 4_000_000


def _as_dx(dx) -> np.ndarray:
    if isinstance(dx, FourVector):
        return dx.to_array()[None, :]
    a = np.asarray(dx, dtype=float)
    return a.reshape(-1, 4)


def _unwrap(vals: np.ndarray, dx):
    if isinstance(dx, FourVector) or np.ndim(dx) == 1:
        return complex(vals[0])
    return vals.reshape(np.shape(dx)[:-1])


@dataclass(frozen=True)
class ShellKernel:
    """A mode sum over one (possibly noise-shifted) mass shell.

    ``normalization='feynman'`` gives ``W = 1/((2pi)^3 2 omega)`` with
    ``Omega = omega``; ``'noisy'`` gives ``W = (2pi)^{-3/2} / D`` with
    ``Omega = varpi`` and ``D`` the shifted-shell weight.
    """

    xi: float
    zeta: ZetaParams = field(default_factory=ZetaParams)
    normalization: str = "feynman"

    def __post_init__(self):
        if self.xi < 0:
            raise DomainError(f"xi must be >= 0, got {self.xi!r}")
        if self.normalization not in ("feynman", "noisy"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.normalization == "feynman" and not self.zeta.is_zero:
            raise ValueError("the free normalization takes zeta = 0")

    @property
    def isotropic(self) -> bool:
        return self.zeta.is_spatially_zero

    def frequency(self, k):
        if self.normalization == "feynman":
            return omega(k, self.xi)
        return varpi(k, self.xi, self.zeta)

    def weight(self, k):
        if self.normalization == "feynman":
            return 1.0 / (TWO_PI ** 3 * 2.0 * omega(k, self.xi))
        return TWO_PI ** -1.5 / shell_weight(k, self.xi, self.zeta)

    def nodes(self, q: QuadratureConfig):
        """Full 3-D nodes ``(k, w * W(k), Omega(k))``."""
        k, w = sphere_rule(q)
        return k, w * self.weight(k), self.frequency(k)

    def positive_branch(self, dx, q: QuadratureConfig):
        """``I(dx)`` for one FourVector or an array of shape ``(..., 4)``."""
        d = _as_dx(dx)
        return _unwrap(self._branch(d, q), dx)

    def time_ordered(self, dx, q: QuadratureConfig):
        d = _as_dx(dx)
        return _unwrap(self._time_ordered(d, q), dx)

    def _time_ordered(self, d: np.ndarray, q: QuadratureConfig) -> np.ndarray:
        sgn = np.sign(d[:, 0])
        out = self._branch(np.where(sgn[:, None] < 0, -d, d), q)
        tie = sgn == 0
        if np.any(tie):
            out[tie] = 0.5 * (out[tie] + self._branch(-d[tie], q))
        return out

    def _branch(self, d: np.ndarray, q: QuadratureConfig) -> np.ndarray:
        if self.isotropic and q.collapse_isotropic:
            r, wr = radial_rule(q)
            kv = np.zeros((r.size, 3))
            kv[:, 2] = r
            base = 4.0 * math.pi * wr * r ** 2 * self.weight(kv)
            om = self.frequency(kv)
            dist = np.linalg.norm(d[:, 1:], axis=1)
            return _contract(lambda s: sinc(np.outer(dist[s], r)) * np.exp(-1j * np.outer(d[s, 0], om)),
                             base, len(d), r.size)
        k, w = sphere_rule(q)
        base = w * self.weight(k)
        om = self.frequency(k)
        return _contract(lambda s: np.exp(-1j * (np.outer(d[s, 0], om) - d[s, 1:] @ k.T)),
                         base, len(d), len(k))


def _contract(phase_block, base, m, n):
    out = np.empty(m, dtype=complex)
    step = max(1, _CHUNK // max(n, 1))
    for start in range(0, m, step):
        s = slice(start, min(m, start + step))
        out[s] = phase_block(s) @ base
    return out


# ---------------------------------------------------------------------------
# fixed-mass kernels

def wightman(dx, xi: float, q: QuadratureConfig):
    """Vacuum two-point function ``<0|phi(x) phi^dagger(y)|0>`` at ``dx = x - y``."""
    return ShellKernel(xi).positive_branch(dx, q)


def feynman(x: FourVector, y: FourVector, xi: float, q: QuadratureConfig) -> complex:
    """Time-ordered free kernel ``i Delta_F(x, y)``; equal times average the branches."""
    return ShellKernel(xi).time_ordered(x - y, q)


def noisy_feynman(x: FourVector, y: FourVector, xi: float, zeta: ZetaParams,
                  q: QuadratureConfig) -> complex:
    """Time-ordered kernel on the noise-shifted shell with frequency ``varpi``."""
    return ShellKernel(xi, zeta, "noisy").time_ordered(x - y, q)


def wightman_on_xi_grid(dx, xi_grid, q: QuadratureConfig) -> np.ndarray:
    """Wightman values for one ``dx`` across a whole xi grid (isotropic rule)."""
    d = _as_dx(dx)[0]
    xi = np.asarray(xi_grid, dtype=float)
    if np.any(xi < 0):
        raise DomainError("xi grid must be >= 0")
    if q.collapse_isotropic:
        r, wr = radial_rule(q)
        om = np.sqrt(r[None, :] ** 2 + xi[:, None])
        base = 4.0 * math.pi * wr * r ** 2 * sinc(r * np.linalg.norm(d[1:]))
        return (np.exp(-1j * om * d[0]) / (TWO_PI ** 3 * 2.0 * om)) @ base
    k, w = sphere_rule(q)
    k2 = np.sum(k * k, axis=1)
    out = np.empty(xi.size, dtype=complex)
    spatial = np.exp(1j * (k @ d[1:])) * w
    for i, x in enumerate(xi):
        om = np.sqrt(k2 + x)
        out[i] = np.sum(spatial * np.exp(-1j * om * d[0]) / (TWO_PI ** 3 * 2.0 * om))
    return out


# ---------------------------------------------------------------------------
# positive-cone kernels

def _cone_integral(d: np.ndarray, tau: float, q: QuadratureConfig, xi_max: float) -> np.ndarray:
    """``int d^3k int_{|k|}^{k0max} dk0 exp(-2 k^2 tau) exp(-i k.dx)`` (no prefactor)."""
    k0_max = math.sqrt(q.k_max ** 2 + xi_max)
    if q.collapse_isotropic:
        r, wr = radial_rule(q)
        e, we = energy_rule(r, k0_max, q)
        damp = we * np.exp(-2.0 * tau * (e * e - (r * r)[:, None]))
        base = (4.0 * math.pi * wr * r ** 2)[:, None] * damp
        dist = np.linalg.norm(d[:, 1:], axis=1)
        ef, bf = e.ravel(), base.ravel()
        rf = np.repeat(r, e.shape[1])
        return _contract(lambda s: sinc(np.outer(dist[s], rf)) * np.exp(-1j * np.outer(d[s, 0], ef)),
                         bf, len(d), bf.size)
    k, w = sphere_rule(q)
    kabs = np.linalg.norm(k, axis=1)
    e, we = energy_rule(kabs, k0_max, q)
    damp = we * np.exp(-2.0 * tau * (e * e - (kabs * kabs)[:, None]))
    bf = (w[:, None] * damp).ravel()
    ef = e.ravel()
    kf = np.repeat(k, e.shape[1], axis=0)
    return _contract(lambda s: np.exp(-1j * (np.outer(d[s, 0], ef) - d[s, 1:] @ kf.T)),
                     bf, len(d), bf.size)


def phi_tau_kernel(dx, tau: float, q: QuadratureConfig, xi_max: float = 64.0):
    """``<0|Phi(x, tau) Phi^dagger(y, tau)|0>`` for the tau-evolved field.

    Positive-cone integral of ``exp(-2 k^2 tau)`` with the energy cut at
    ``sqrt(k_max^2 + xi_max)``; requires ``tau > 0``.
    """
    if not tau > 0:
        raise DomainError(f"phi_tau_kernel needs tau > 0, got {tau!r}")
    d = _as_dx(dx)
    return _unwrap(_cone_integral(d, tau, q, xi_max) / TWO_PI ** 3, dx)


def laplace_side(dx, tau: float, xi_grid, q: QuadratureConfig) -> complex:
    """Transform at ``2 tau`` of the xi-gridded Wightman function."""
    grid = np.asarray(xi_grid, dtype=float)
    measure = SpectralMeasure(grid=grid, values=wightman_on_xi_grid(dx, grid, q))
    return complex(laplace_forward(measure, 2.0 * tau))


# ---------------------------------------------------------------------------
# kernel specs

@dataclass(frozen=True)
class KernelSpec:
    """Selects one of the two-point kernels; unused fields are ignored.

    ``negate`` flips the sign of the kernel (sanity inversion for sweeps).
    """

    kind: str
    xi: float = 1.0
    tau: float = 1.0
    zeta: ZetaParams = field(default_factory=ZetaParams)
    xi_max: float = 64.0
    negate: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not isinstance(self.zeta, ZetaParams):
            object.__setattr__(self, "zeta", ZetaParams.of(self.zeta))
        if self.xi < 0:
            raise DomainError(f"xi must be >= 0, got {self.xi!r}")
        if self.kind == "phi_tau" and not self.tau > 0:
            raise DomainError("phi_tau needs tau > 0")
        if self.kind == "commutator_cutoff" and not self.xi_max > 0:
            raise DomainError("xi_max must be positive")

    @property
    def shell(self) -> ShellKernel | None:
        if self.kind in ("wightman", "feynman", "commutator_fixed_mass"):
            return ShellKernel(self.xi)
        if self.kind == "noisy_feynman":
            return ShellKernel(self.xi, self.zeta, "noisy")
        return None

    def of_difference(self, dx, q: QuadratureConfig):
        """Kernel value as a function of ``x - y`` (all kinds are stationary)."""
        d = _as_dx(dx)
        kind = self.kind
        if kind == "wightman":
            vals = self.shell._branch(d, q)
        elif kind in ("feynman", "noisy_feynman"):
            vals = self.shell._time_ordered(d, q)
        elif kind == "phi_tau":
            vals = _cone_integral(d, self.tau, q, self.xi_max) / TWO_PI ** 3
        elif kind == "commutator_fixed_mass":
            vals = 2j * self.shell._branch(d, q).imag
        else:
            vals = 2j * _cone_integral(d, 0.0, q, self.xi_max).imag
        if self.negate:
            vals = -vals
        return _unwrap(vals, dx)

    def __call__(self, x: FourVector, y: FourVector, q: QuadratureConfig) -> complex:
        return self.of_difference(x - y, q)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "xi": self.xi,
            "tau": self.tau,
            "zeta": self.zeta.zeta.to_array().tolist(),
            "xi_max": self.xi_max,
            "negate": self.negate,
        }


def commutator_kernel(dx, spec: KernelSpec, q: QuadratureConfig):
    """Antisymmetrised mode integral ``int [e^{-ik.dx} - e^{+ik.dx}]``.

    ``commutator_fixed_mass`` integrates the mass shell with the Lorentz
    weight ``1/((2pi)^3 2 omega)``; ``commutator_cutoff`` integrates the
    positive cone with energy cut ``sqrt(k_max^2 + xi_max)`` and no prefactor.
    """
    if spec.kind not in ("commutator_fixed_mass", "commutator_cutoff"):
        raise ValueError(f"{spec.kind!r} is not a commutator kind")
    return spec.of_difference(dx, q)
