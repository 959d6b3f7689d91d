"""Mode lattices, the Klein-Gordon inner product and finite-difference residuals.

Spatial sampling lives on a periodic box ``[-L, L)^3`` whose lattice momenta
``pi n / L`` make the trapezoid rule exact for products of commensurate
plane waves.  Time is sampled on ``[-t_window/2, t_window/2]`` with both
endpoints included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import DomainError, FourVector, in_positive_cone, minkowski_dot, omega

NORMALIZATIONS = ("kg", "pc")


@dataclass(frozen=True)
class BoxGrid:
    L: float
    n_space: int
    t_window: float
    n_time: int

    def __post_init__(self):
        if self.n_space < 4 or self.n_space % 2:
            raise ValueError(f"n_space must be even and >= 4, got {self.n_space}")
        if not (self.L > 0 and self.t_window > 0):
            raise ValueError("L and t_window must be positive")
        if self.n_time < 2:
            raise ValueError("n_time must be >= 2")

    @property
    def hx(self) -> float:
        return 2.0 * self.L / self.n_space

    @property
    def ht(self) -> float:
        return self.t_window / (self.n_time - 1)

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** 3

    @property
    def shape(self) -> tuple:
        return (self.n_time, self.n_space, self.n_space, self.n_space)

    def space_axis(self) -> np.ndarray:
        return -self.L + self.hx * np.arange(self.n_space)

    def time_axis(self) -> np.ndarray:
        return -0.5 * self.t_window + self.ht * np.arange(self.n_time)

    def axes(self) -> tuple:
        s = self.space_axis()
        return (self.time_axis(), s, s, s)

    def time_weights(self) -> np.ndarray:
        w = np.full(self.n_time, self.ht)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def weights(self) -> np.ndarray:
        """Trapezoid cell weights on the full 4-D grid."""
        return self.time_weights()[:, None, None, None] * np.full(self.shape[1:], self.hx ** 3)

    def points(self) -> np.ndarray:
        """All grid points as an array of shape ``shape + (4,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def lattice_momentum(self, n, xi: float) -> FourVector:
        """On-shell four-momentum with spatial part ``pi n / L``."""
        k = math.pi * np.asarray(n, dtype=float) / self.L
        return FourVector(omega(k, xi), *k)

    def refined(self) -> "BoxGrid":
        """Nested refinement: halves both spacings, keeps every old node."""
        return BoxGrid(self.L, 2 * self.n_space, self.t_window, 2 * self.n_time - 1)

    def to_dict(self) -> dict:
        return {"L": self.L, "n_space": self.n_space, "t_window": self.t_window, "n_time": self.n_time}


@dataclass(frozen=True)
class Mode:
    k: FourVector
    particle: complex = 0.0
    antiparticle: complex = 0.0


@dataclass(frozen=True)
class ModeLattice:
    """Finite set of positive-cone momenta with particle/antiparticle amplitudes."""

    modes: tuple = ()

    def __post_init__(self):
        modes = tuple(self.modes)
        seen = set()
        for m in modes:
            if not in_positive_cone(m.k):
                raise DomainError(f"mode momentum {m.k} is outside the positive cone")
            key = (m.k.t, m.k.x, m.k.y, m.k.z)
            if key in seen:
                raise ValueError(f"duplicate mode momentum {m.k}")
            seen.add(key)
        object.__setattr__(self, "modes", modes)

    @classmethod
    def from_arrays(cls, momenta, particle, antiparticle=None) -> "ModeLattice":
        momenta = np.asarray(momenta, dtype=float).reshape(-1, 4)
        particle = np.asarray(particle, dtype=complex).ravel()
        if antiparticle is None:
            antiparticle = np.zeros_like(particle)
        antiparticle = np.asarray(antiparticle, dtype=complex).ravel()
        return cls(tuple(
            Mode(FourVector.from_array(k), complex(a), complex(b))
            for k, a, b in zip(momenta, particle, antiparticle)
        ))

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def momenta(self) -> np.ndarray:
        return np.array([m.k.to_array() for m in self.modes]).reshape(-1, 4)

    @property
    def particle(self) -> np.ndarray:
        return np.array([m.particle for m in self.modes], dtype=complex)

    @property
    def antiparticle(self) -> np.ndarray:
        return np.array([m.antiparticle for m in self.modes], dtype=complex)

    @property
    def k_squared(self) -> np.ndarray:
        return np.array([minkowski_dot(m.k, m.k) for m in self.modes])

    def with_amplitudes(self, particle, antiparticle) -> "ModeLattice":
        return ModeLattice.from_arrays(self.momenta, particle, antiparticle)


# ---------------------------------------------------------------------------
# mode functions

def mode_function(k: FourVector, x, normalization: str = "kg"):
    """Normalised plane wave ``N(k) exp(-i k.x)`` with ``omega = k^0``.

    ``kg``: ``N = [(2pi)^3 2 omega]^{-1/2}`` (fixed-mass shell states);
    ``pc``: ``N = 1 / ((2pi)^2 sqrt(2 omega))`` (positive-cone states,
    orthonormal in ``d^4x``).  ``x`` may be a FourVector or an array of
    shape ``(..., 4)``.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    w = k.t
    if normalization == "kg":
        norm = ((2.0 * math.pi) ** 3 * 2.0 * w) ** -0.5
    else:
        norm = 1.0 / ((2.0 * math.pi) ** 2 * math.sqrt(2.0 * w))
    if isinstance(x, FourVector):
        return norm * np.exp(-1j * minkowski_dot(k, x))
    xa = np.asarray(x, dtype=float)
    phase = k.t * xa[..., 0] - xa[..., 1:] @ k.spatial
    return norm * np.exp(-1j * phase)


def pc_window_overlap(kvec, xi: float, xi_prime: float, t_window: float, n_time: int = 4001) -> float:
    """Time-windowed positive-cone overlap, per unit ``delta^3(k - k')``.

    ``int_{-T/2}^{T/2} dt`` of the time factors of ``g*_{k,xi} g_{k,xi'}``
    times ``(2pi)^3``.  Tends to ``delta(xi - xi')`` as ``T`` grows: the
    peak sits at ``xi = xi'`` with height ``T / (4 pi omega)`` and width
    ``~ 4 pi omega / T``.
    """
    w1 = omega(kvec, xi)
    w2 = omega(kvec, xi_prime)
    t = np.linspace(-0.5 * t_window, 0.5 * t_window, n_time)
    vals = np.exp(1j * (w1 - w2) * t)
    integral = np.trapezoid(vals, t)
    return float(integral.real) / (2.0 * math.pi * 2.0 * math.sqrt(w1 * w2))


# ---------------------------------------------------------------------------
# Klein-Gordon inner product on a time slice

@dataclass(frozen=True)
class FieldSlice:
    """Spatial samples of a field and its time derivative at one instant."""

    value: np.ndarray
    dot: np.ndarray

    @classmethod
    def from_slices(cls, before, after, dt: float) -> "FieldSlice":
        """Midpoint value and central-difference derivative of two adjacent slices."""
        before = np.asarray(before)
        after = np.asarray(after)
        if before.shape != after.shape:
            raise ValueError("slices differ in shape")
        return cls(0.5 * (before + after), (after - before) / dt)


def kg_inner_product(phi, psi, grid: BoxGrid, dt: float | None = None) -> complex:
    """``int phi* i d0<-> psi d^3x`` on the periodic box.

    ``phi`` and ``psi`` are :class:`FieldSlice` objects, or arrays of shape
    ``(2, n, n, n)`` holding two slices ``dt`` apart (the product is then
    taken at their midpoint).
    """
    phi = _as_slice(phi, dt)
    psi = _as_slice(psi, dt)
    want = (grid.n_space,) * 3
    for s in (phi, psi):
        if s.value.shape != want or s.dot.shape != want:
            raise ValueError(f"field samples have shape {s.value.shape}, grid expects {want}")
    integrand = np.conj(phi.value) * psi.dot - np.conj(phi.dot) * psi.value
    return complex(1j * grid.hx ** 3 * np.sum(integrand))


def _as_slice(f, dt):
    if isinstance(f, FieldSlice):
        return f
    a = np.asarray(f)
    if a.ndim != 4 or a.shape[0] != 2:
        raise ValueError("expected a FieldSlice or two stacked time slices")
    if dt is None:
        raise ValueError("dt is required for sampled slices")
    return FieldSlice.from_slices(a[0], a[1], dt)


def superposition(momenta, coeffs, grid: BoxGrid, t: float) -> FieldSlice:
    """Box analogue of the mass-shell expansion, sampled analytically at time ``t``.

    ``phi(x) = (1/V) sum_n c_n exp(-i k_n.x) / (2 k_n^0)``; its time
    derivative is exact.
    """
    ks = np.asarray(momenta, dtype=float).reshape(-1, 4)
    c = np.asarray(coeffs, dtype=complex).ravel()
    ax = grid.space_axis()
    value = np.zeros((grid.n_space,) * 3, dtype=complex)
    dot = np.zeros_like(value)
    for k, cn in zip(ks, c):
        ex = np.exp(1j * k[1] * ax)
        ey = np.exp(1j * k[2] * ax)
        ez = np.exp(1j * k[3] * ax)
        amp = cn * np.exp(-1j * k[0] * t) / (2.0 * k[0] * grid.volume)
        term = amp * ex[:, None, None] * ey[None, :, None] * ez[None, None, :]
        value += term
        dot += -1j * k[0] * term
    return FieldSlice(value, dot)


def box_normalized_mode(k: FourVector, grid: BoxGrid, t: float = 0.0) -> FieldSlice:
    """Single lattice mode with unit KG norm on the box."""
    c = math.sqrt(2.0 * k.t * grid.volume)
    return superposition(k.to_array(), [c], grid, t)


def parseval_sum(momenta, phi_coeffs, psi_coeffs, grid: BoxGrid) -> complex:
    """Coefficient-space inner product ``(1/V) sum conj(Phi_n) Psi_n / (2 k_n^0)``."""
    ks = np.asarray(momenta, dtype=float).reshape(-1, 4)
    a = np.asarray(phi_coeffs, dtype=complex)
    b = np.asarray(psi_coeffs, dtype=complex)
    return complex(np.sum(np.conj(a) * b / (2.0 * ks[:, 0])) / grid.volume)


# ---------------------------------------------------------------------------
# finite-difference residuals

def _box_operator(phi: np.ndarray, ht: float, hx: float) -> np.ndarray:
    """Second-order ``d_t^2 - nabla^2`` on interior points of a 4-D array."""
    if any(n < 3 for n in phi.shape):
        raise ValueError(f"need >= 3 points per axis, got {phi.shape}")
    c = phi[1:-1, 1:-1, 1:-1, 1:-1]
    inner = (slice(1, -1),) * 4

    def second(axis, h):
        lo = list(inner)
        hi = list(inner)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        return (phi[tuple(hi)] - 2.0 * c + phi[tuple(lo)]) / (h * h)

    return second(0, ht) - second(1, hx) - second(2, hx) - second(3, hx)


def el_residual(phi, xi: float, grid: BoxGrid) -> np.ndarray:
    """``(box + xi) phi`` on interior grid points (central differences in t, x, y, z)."""
    phi = np.asarray(phi)
    if phi.shape != grid.shape:
        raise ValueError(f"field shape {phi.shape} does not match grid {grid.shape}")
    return _box_operator(phi, grid.ht, grid.hx) + xi * phi[1:-1, 1:-1, 1:-1, 1:-1]


def plane_wave(k: FourVector, grid: BoxGrid, sign: int = -1) -> np.ndarray:
    """``exp(sign * i k.x)`` sampled on the full grid."""
    t, s, _, _ = grid.axes()
    et = np.exp(sign * 1j * k.t * t)
    ex = np.exp(-sign * 1j * k.x * s)
    ey = np.exp(-sign * 1j * k.y * s)
    ez = np.exp(-sign * 1j * k.z * s)
    return et[:, None, None, None] * ex[None, :, None, None] * ey[None, None, :, None] * ez[None, None, None, :]


def tau_field(state: ModeLattice, tau: float, grid: BoxGrid) -> np.ndarray:
    """``Phi(x, tau) = sum [a e^{-ikx} + b e^{+ikx}] exp(-k^2 tau)`` on the grid."""
    out = np.zeros(grid.shape, dtype=complex)
    for m in state.modes:
        damp = math.exp(-minkowski_dot(m.k, m.k) * tau)
        if m.particle:
            out += m.particle * damp * plane_wave(m.k, grid, -1)
        if m.antiparticle:
            out += m.antiparticle * damp * plane_wave(m.k, grid, +1)
    return out


def mike_residual(state: ModeLattice, tau: float, dtau: float, grid: BoxGrid,
                  exact_tau: bool = False, exact_box: bool = False) -> float:
    """Max-norm of ``dPhi/dtau - box Phi`` on interior grid points.

    The tau derivative is a central difference with step ``dtau`` and the box
    operator is second-order finite differences, unless the corresponding
    ``exact_*`` flag substitutes the analytic value ``-k^2 Phi`` so that one
    discretisation can be studied on its own.
    """
    if not (tau > 0 and dtau > 0):
        raise DomainError("tau and dtau must be positive")
    if len(state) == 0:
        return 0.0
    inner = (slice(1, -1),) * 4
    phi = tau_field(state, tau, grid)
    exact = tau_field(_scaled_by_k2(state), tau, grid)[inner]
    if exact_tau:
        dphi = exact
    else:
        dphi = ((tau_field(state, tau + dtau, grid) - tau_field(state, tau - dtau, grid)) / (2.0 * dtau))[inner]
    box = exact if exact_box else _box_operator(phi, grid.ht, grid.hx)
    return float(np.max(np.abs(dphi - box)))


def _scaled_by_k2(state: ModeLattice) -> ModeLattice:
    k2 = state.k_squared
    return state.with_amplitudes(-k2 * state.particle, -k2 * state.antiparticle)


# ---------------------------------------------------------------------------
# energy and real-time evolution

def energy_functional(state: ModeLattice) -> float:
    """Normal-ordered energy ``sum k^0 (|a|^2 + |b|^2)``."""
    if len(state) == 0:
        return 0.0
    k0 = state.momenta[:, 0]
    terms = k0 * (np.abs(state.particle) ** 2 + np.abs(state.antiparticle) ** 2)
    # correctly rounded, so the result does not depend on mode order
    return math.fsum(terms)


def phase_evolve(state: ModeLattice, t: float) -> ModeLattice:
    """Heisenberg evolution: ``a -> a e^{-i k^0 t}``, ``b -> b e^{+i k^0 t}``."""
    if len(state) == 0:
        return state
    k0 = state.momenta[:, 0]
    return state.with_amplitudes(state.particle * np.exp(-1j * k0 * t),
                                 state.antiparticle * np.exp(1j * k0 * t))
