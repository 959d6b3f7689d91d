"""Mass-squared measures and the xi <-> tau Laplace machinery.

A :class:`SpectralMeasure` is a finite set of point atoms plus an optional
density sampled on an ascending xi grid.  Forward transforms are exact on the
atoms and trapezoidal on the density.  Inversion is only offered for the
closed-form exponential-step family, which is all the propagator algebra
ever needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .kinematics import DomainError


@dataclass(frozen=True)
class SpectralMeasure:
    atoms: tuple = ()
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        for x, _ in atoms:
            if not x >= 0.0:
                raise DomainError(f"atom location {x!r} outside [0, inf)")
        object.__setattr__(self, "atoms", atoms)
        if (self.grid is None) != (self.values is None):
            raise ValueError("grid and values must be given together")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values)
            if g.ndim != 1 or g.size < 2:
                raise ValueError("density grid needs at least 2 points")
            if g.shape != v.shape:
                raise ValueError("grid and values differ in shape")
            if g[0] < 0.0:
                raise DomainError("density grid extends below xi = 0")
            if np.any(np.diff(g) <= 0.0):
                raise ValueError("density grid must be strictly ascending")
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "values", v)

    @classmethod
    def empty(cls) -> "SpectralMeasure":
        return cls()

    @classmethod
    def atom(cls, xi: float, weight: float = 1.0) -> "SpectralMeasure":
        return cls(atoms=((xi, weight),))

    @classmethod
    def from_density(cls, grid, fn) -> "SpectralMeasure":
        g = np.asarray(grid, dtype=float)
        return cls(grid=g, values=np.asarray(fn(g)))

    @property
    def is_empty(self) -> bool:
        return not self.atoms and self.grid is None

    def __add__(self, other: "SpectralMeasure") -> "SpectralMeasure":
        if self.grid is not None and other.grid is not None:
            if not np.array_equal(self.grid, other.grid):
                raise ValueError("cannot add densities on different grids")
            grid, values = self.grid, self.values + other.values
        else:
            grid = self.grid if self.grid is not None else other.grid
            values = self.values if self.values is not None else other.values
        return SpectralMeasure(self.atoms + other.atoms, grid, values)

    def scaled(self, c: float) -> "SpectralMeasure":
        atoms = tuple((x, c * w) for x, w in self.atoms)
        values = None if self.values is None else c * self.values
        return SpectralMeasure(atoms, self.grid, values)

    def to_dict(self) -> dict:
        d = {"atoms": [[x, w] for x, w in self.atoms]}
        if self.grid is not None:
            d["grid"] = self.grid.tolist()
            d["values"] = np.real_if_close(self.values).tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralMeasure":
        grid = d.get("grid")
        values = d.get("values")
        return cls(
            atoms=tuple(tuple(a) for a in d.get("atoms", [])),
            grid=None if grid is None else np.asarray(grid, dtype=float),
            values=None if values is None else np.asarray(values),
        )

    @classmethod
    def from_json(cls, text: str) -> "SpectralMeasure":
        return cls.from_dict(json.loads(text))


def laplace_forward(measure: SpectralMeasure, tau):
    """``sum_i w_i exp(-tau xi_i) + int density(xi) exp(-tau xi) dxi``.

    ``tau`` may be a scalar or an array; the density part uses the
    trapezoid rule on the measure's own grid.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0.0):
        raise DomainError(f"tau must be >= 0, got {tau!r}")
    t = tau_arr[..., None]
    out = np.zeros(tau_arr.shape, dtype=complex)
    if measure.atoms:
        xs = np.array([a[0] for a in measure.atoms])
        ws = np.array([a[1] for a in measure.atoms])
        out = out + np.sum(ws * np.exp(-t * xs), axis=-1)
    if measure.grid is not None:
        out = out + np.trapezoid(measure.values * np.exp(-t * measure.grid), measure.grid, axis=-1)
    if not np.iscomplexobj(measure.values) and np.all(out.imag == 0):
        out = out.real
    return out.item() if out.ndim == 0 else out


def inverse_laplace_expstep(a: float, half_scaling: bool = False) -> SpectralMeasure:
    """Inverse transform of ``exp(-a tau) theta(a)``.

    With ``half_scaling`` the transform variable is read at ``2 xi`` (and the
    exponent at ``2 tau``), which leaves the atom at ``a`` but halves its
    weight.  ``a <= 0`` is cut by the step and gives the empty measure.
    """
    if a <= 0.0:
        return SpectralMeasure.empty()
    return SpectralMeasure.atom(a, 0.5 if half_scaling else 1.0)


def xi_convolution(f, g, xi, n_panels: int = 16, order: int = 16, breakpoints=()):
    """``int_0^xi f(xi - s) g(s) ds`` by composite Gauss-Legendre.

    ``f`` and ``g`` must be vectorised callables.  ``xi`` may be an array, in
    which case every entry uses the same relative panel layout.  Extra
    ``breakpoints`` (absolute positions of narrow features in ``s``) are
    added as panel edges when they fall inside ``(0, xi)``.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0.0):
        raise DomainError("xi must be >= 0")
    nodes, weights = leggauss(order)
    scalar = xi_arr.ndim == 0
    xs = np.atleast_1d(xi_arr).ravel()
    out = np.empty(xs.shape, dtype=complex)
    if breakpoints:
        for i, x in enumerate(xs):
            edges = np.linspace(0.0, x, n_panels + 1)
            extra = [b for b in breakpoints if 0.0 < b < x]
            edges = np.unique(np.concatenate([edges, extra]))
            lo, hi = edges[:-1, None], edges[1:, None]
            s = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
            w = 0.5 * (hi - lo) * weights
            out[i] = np.sum(w * f(x - s) * g(s))
    else:
        # panel layout scales with xi, so the reference nodes are shared
        u = np.linspace(0.0, 1.0, n_panels + 1)
        lo, hi = u[:-1, None], u[1:, None]
        ref_s = (0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)).ravel()
        ref_w = (0.5 * (hi - lo) * weights).ravel()
        chunk = max(1, 2_000_000 // ref_s.size)
        for start in range(0, xs.size, chunk):
            x = xs[start:start + chunk, None]
            s = x * ref_s
            out[start:start + chunk] = np.sum(x * ref_w * f(x - s) * g(s), axis=-1)
    if np.all(out.imag == 0):
        out = out.real
    return out[0] if scalar else out.reshape(np.shape(xi_arr))


def kl_spectral_integral(rho: SpectralMeasure, kernel, x):
    """Spectral superposition ``int rho(xi) kernel(xi, x) dxi``.

    Atoms contribute ``w_i kernel(xi_i, x)`` exactly; the density part is a
    trapezoid over the measure grid.
    """
    total = 0.0 + 0.0j
    for xi, w in rho.atoms:
        total += w * kernel(xi, x)
    if rho.grid is not None:
        vals = np.array([kernel(xi, x) for xi in rho.grid])
        total += np.trapezoid(rho.values * vals, rho.grid)
    return total


def graded_grid(xi_max: float, n: int, power: float = 2.0) -> np.ndarray:
    """``n`` points on ``[0, xi_max]`` clustered towards zero as ``u**power``.

    Used where the integrand has a ``xi log xi`` edge at the origin.
    """
    u = np.linspace(0.0, 1.0, n)
    return xi_max * u ** power
