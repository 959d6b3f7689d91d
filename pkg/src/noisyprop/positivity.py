"""Kernel-positivity functionals ``sigma[f] = int int f*(x) K(x, y) f(y)``.

Two evaluation paths are provided.

*Direct*: the double sum over grid points with trapezoid weights.  For the
stationary kernels of :mod:`noisyprop.propagators` the kernel is tabulated
once on the difference lattice and contracted with the autocorrelation of
``w f``; arbitrary ``(x, y)`` callables fall back to an explicit matrix.

*Momentum*: for shell kernels ``K = int d^3k W(k) e^{-i(Omega dt - k.dx)}``
(time ordered or not) the spatial sums factor through the slice transforms
``F_a(k) = sum_x w f(t_a, x) e^{-ik.x}``.  With ``P_a = e^{i Omega t_a} F_a(k)``
and ``Q_a = e^{-i Omega t_a} F_a(-k)`` the time-ordered integrand at ``k`` is

    sum_ab theta_ab conj(P_a) P_b + theta_ba conj(Q_a) Q_b,   theta(0) = 1/2,

whose real part is ``|C|^2 + |S|^2`` with ``C = (sum P + sum Q)/2`` and
``S = (sum P - sum Q)/2i`` the cosine and sine transforms of ``f``.  The real
part is therefore nonnegative node by node.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import correlate

from .fields import BoxGrid
from .kinematics import FourVector, ZetaParams
from .propagators import KernelSpec, ShellKernel
from .quadrature import QuadratureConfig, sphere_rule

FORMS = ("grid", "gaussian_packet")
MOMENTUM_KINDS = ("wightman", "feynman", "noisy_feynman")

#: default cap on grid points for the explicit-matrix direct path
DIRECT_MAX_POINTS = 2048

_NODE_CHUNK = 2048


class GridTooLargeError(ValueError):
    """The explicit double sum would exceed the configured size cap."""


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class TestFunction:
    """A finite-norm probe function on a spacetime box.

    Use :meth:`gaussian_packet` or :meth:`on_grid` rather than the raw
    constructor.  Packets are separable,

        f(x) = A exp(-i p.x) prod_mu exp(-(x^mu - c^mu)^2 / (2 s_mu^2)),

    with ``p`` the carrier four-wave-vector, which the momentum path
    exploits.
    """

    __test__ = False  # not a pytest class

    form: str
    samples: np.ndarray | None = None
    center: FourVector = FourVector(0.0)
    widths: tuple = (1.0, 1.0, 1.0, 1.0)
    carrier: FourVector = FourVector(0.0)
    amplitude: complex = 1.0
    label: str = ""

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown test-function form {self.form!r}")
        if self.form == "grid":
            s = np.asarray(self.samples, dtype=complex)
            if s.ndim != 4:
                raise ValueError("grid samples must be 4-D (t, x, y, z)")
            if not np.all(np.isfinite(s)) or not np.any(s != 0):
                raise ValueError("grid test function must be finite with nonzero norm")
            object.__setattr__(self, "samples", s)
        else:
            w = tuple(float(v) for v in self.widths)
            if len(w) != 4 or min(w) <= 0.0:
                raise ValueError(f"packet widths must be 4 positive reals, got {self.widths!r}")
            if self.amplitude == 0:
                raise ValueError("packet amplitude must be nonzero")
            object.__setattr__(self, "widths", w)

    @classmethod
    def gaussian_packet(cls, center, widths, carrier, amplitude=1.0, label="") -> "TestFunction":
        if not isinstance(center, FourVector):
            center = FourVector.from_array(center)
        if not isinstance(carrier, FourVector):
            carrier = FourVector.from_array(carrier)
        return cls("gaussian_packet", None, center, tuple(widths), carrier, complex(amplitude), label)

    @classmethod
    def on_grid(cls, samples, label="") -> "TestFunction":
        return cls("grid", samples=samples, label=label)

    def axis_factors(self, grid: BoxGrid) -> list:
        """Per-axis 1-D factors (t, x, y, z) of a packet; amplitude sits on t."""
        if self.form != "gaussian_packet":
            raise ValueError("only packets are separable")
        c = self.center.to_array()
        p = self.carrier.to_array()
        sign = (-1.0, 1.0, 1.0, 1.0)
        out = []
        for mu, ax in enumerate(grid.axes()):
            g = np.exp(-0.5 * ((ax - c[mu]) / self.widths[mu]) ** 2 + sign[mu] * 1j * p[mu] * ax)
            out.append(g)
        out[0] = self.amplitude * out[0]
        return out

    def sample(self, grid: BoxGrid) -> np.ndarray:
        if self.form == "grid":
            if self.samples.shape != grid.shape:
                raise ValueError(f"samples {self.samples.shape} do not fit grid {grid.shape}")
            return self.samples
        ft, fx, fy, fz = self.axis_factors(grid)
        return np.einsum("a,b,c,d->abcd", ft, fx, fy, fz)

    def norm_squared(self, grid: BoxGrid) -> float:
        return float(np.sum(grid.weights() * np.abs(self.sample(grid)) ** 2))

    def scaled(self, alpha: complex) -> "TestFunction":
        if self.form == "grid":
            return TestFunction.on_grid(alpha * self.samples, self.label)
        return TestFunction.gaussian_packet(self.center, self.widths, self.carrier,
                                            alpha * self.amplitude, self.label)

    def to_dict(self) -> dict:
        if self.form == "grid":
            return {"form": "grid", "label": self.label, "shape": list(self.samples.shape)}
        a = complex(self.amplitude)
        return {
            "form": "gaussian_packet",
            "label": self.label,
            "center": self.center.to_array().tolist(),
            "widths": list(self.widths),
            "carrier": self.carrier.to_array().tolist(),
            "amplitude": [a.real, a.imag],
        }


def _samples(f, grid: BoxGrid) -> np.ndarray:
    if isinstance(f, TestFunction):
        return f.sample(grid)
    s = np.asarray(f, dtype=complex)
    if s.shape != grid.shape:
        raise ValueError(f"samples {s.shape} do not fit grid {grid.shape}")
    return s


def gaussian_packet_family(rng: np.random.Generator, n: int, grid: BoxGrid,
                           carrier_max: float = 2.0, width_range=(0.2, 0.5)) -> list:
    """``n`` packets with random centres, widths, carriers and amplitudes.

    Centres lie in the inner half of the box, widths are fractions
    ``width_range`` of the half-extent of each axis and carrier components
    are uniform in ``[-carrier_max, carrier_max]`` (energy in ``[0, carrier_max]``).
    """
    half = np.array([0.5 * grid.t_window, grid.L, grid.L, grid.L])
    out = []
    for i in range(n):
        center = rng.uniform(-0.5, 0.5, 4) * half
        widths = rng.uniform(*width_range, 4) * half
        carrier = rng.uniform(-carrier_max, carrier_max, 4)
        carrier[0] = abs(carrier[0])
        amp = complex(rng.normal(), rng.normal())
        out.append(TestFunction.gaussian_packet(center, widths, carrier, amp, label=f"packet-{i}"))
    return out


def smoothed_noise_family(rng: np.random.Generator, n: int, grid: BoxGrid) -> list:
    """``n`` complex white-noise grids after one nearest-neighbour diffusion pass."""
    out = []
    for i in range(n):
        f = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        lap = sum(np.roll(f, 1, ax) + np.roll(f, -1, ax) - 2.0 * f for ax in range(4))
        out.append(TestFunction.on_grid(f + lap / 8.0, label=f"noise-{i}"))
    return out


# ---------------------------------------------------------------------------
# direct path

def difference_lattice(grid: BoxGrid) -> np.ndarray:
    """All ``x - y`` offsets of grid points, shape ``(2nt-1, 2n-1, 2n-1, 2n-1, 4)``."""
    dt = grid.ht * np.arange(-(grid.n_time - 1), grid.n_time)
    ds = grid.hx * np.arange(-(grid.n_space - 1), grid.n_space)
    return np.stack(np.meshgrid(dt, ds, ds, ds, indexing="ij"), axis=-1)


def stationary_table(spec: KernelSpec, grid: BoxGrid, q: QuadratureConfig) -> np.ndarray:
    """Kernel values on :func:`difference_lattice`."""
    d = difference_lattice(grid)
    return np.asarray(spec.of_difference(d, q))


def functional_direct(kernel, f, grid: BoxGrid, q: QuadratureConfig | None = None,
                      table: np.ndarray | None = None, max_points: int = DIRECT_MAX_POINTS) -> complex:
    """Trapezoid double sum ``sum_xy w_x w_y f*(x) K(x, y) f(y)``.

    ``kernel`` is a :class:`KernelSpec` (stationary; needs ``q`` unless a
    precomputed ``table`` from :func:`stationary_table` is passed) or a
    vectorised callable ``K(X, Y)`` on arrays of points with shape
    ``(..., 4)``.  The callable route builds an ``N x N`` matrix and refuses
    grids with more than ``max_points`` points.
    """
    g = grid.weights() * _samples(f, grid)
    if isinstance(kernel, KernelSpec):
        if table is None:
            if q is None:
                raise ValueError("a QuadratureConfig is needed to tabulate the kernel")
            table = stationary_table(kernel, grid, q)
        gc = np.conj(g)
        # R(d) = sum_x conj(g(x)) g(x - d)
        corr = correlate(gc, gc, mode="full", method="fft")
        return complex(np.sum(table * corr))
    n = g.size
    if n > max_points:
        raise GridTooLargeError(
            f"direct path over {n} grid points exceeds the cap of {max_points}; "
            "use functional_momentum for shell kernels or a coarser grid"
        )
    pts = grid.points().reshape(-1, 4)
    mat = np.asarray(kernel(pts[:, None, :], pts[None, :, :]))
    v = g.ravel()
    return complex(np.conj(v) @ mat @ v)


# ---------------------------------------------------------------------------
# momentum path

def _slice_transforms(f, grid: BoxGrid, k: np.ndarray) -> np.ndarray:
    """``F_a(k) = sum_x w_t w_x f(t_a, x) e^{-i k.x}``, shape ``(n_time, len(k))``."""
    ax = grid.space_axis()
    wt = grid.time_weights()
    hx3 = grid.hx ** 3
    out = np.empty((grid.n_time, len(k)), dtype=complex)
    packet = isinstance(f, TestFunction) and f.form == "gaussian_packet"
    if packet:
        ft, fx, fy, fz = f.axis_factors(grid)
        tw = wt * ft
    else:
        s = _samples(f, grid) * wt[:, None, None, None]
    for start in range(0, len(k), _NODE_CHUNK):
        kk = k[start:start + _NODE_CHUNK]
        ex, ey, ez = (np.exp(-1j * np.outer(kk[:, j], ax)) for j in range(3))
        if packet:
            out[:, start:start + len(kk)] = hx3 * np.outer(tw, (ex @ fx) * (ey @ fy) * (ez @ fz))
        else:
            a = np.tensordot(s, ez, axes=([3], [1]))          # (t, x, y, n)
            a = np.einsum("txyn,ny->txn", a, ey)
            out[:, start:start + len(kk)] = hx3 * np.einsum("txn,nx->tn", a, ex)
    return out


@dataclass(frozen=True)
class _MomentumTerms:
    weight: np.ndarray      # quadrature weight times W(k)
    P: np.ndarray           # (n_time, N)
    Q: np.ndarray


def _momentum_terms(shell: ShellKernel, f, grid: BoxGrid, q: QuadratureConfig) -> _MomentumTerms:
    k, w = sphere_rule(q)
    wk = w * shell.weight(k)
    om = shell.frequency(k)
    t = grid.time_axis()
    phase = np.exp(1j * np.outer(t, om))
    P = phase * _slice_transforms(f, grid, k)
    Q = np.conj(phase) * _slice_transforms(f, grid, -k)
    return _MomentumTerms(wk, P, Q)


def _ordered_imag(terms: _MomentumTerms) -> np.ndarray:
    """Per-node ``1/2 Im sum_ab sign(a-b) [conj(P_a) P_b - conj(Q_a) Q_b]``."""

    def signed(X):
        below = np.cumsum(X, axis=0) - X                 # sum over b < a
        above = np.sum(X, axis=0) - below - X            # sum over b > a
        return np.sum(np.conj(X) * (below - above), axis=0)

    return 0.5 * (signed(terms.P) - signed(terms.Q)).imag


def cosine_sine_transforms(terms: _MomentumTerms):
    """``C(k)`` and ``S(k)`` with ``k^0 = Omega(k)``."""
    sp = terms.P.sum(axis=0)
    sq = terms.Q.sum(axis=0)
    return 0.5 * (sp + sq), (sp - sq) / 2j


def functional_momentum(spec: KernelSpec, f, grid: BoxGrid, q: QuadratureConfig) -> complex:
    """Momentum-factorised ``sigma[f]`` for wightman, feynman and noisy_feynman kernels."""
    if spec.kind not in MOMENTUM_KINDS:
        raise ValueError(f"no momentum path for kernel kind {spec.kind!r}")
    terms = _momentum_terms(spec.shell, f, grid, q)
    if spec.kind == "wightman":
        re = np.sum(terms.weight * np.abs(terms.P.sum(axis=0)) ** 2)
        im = 0.0
    else:
        c, s = cosine_sine_transforms(terms)
        re = np.sum(terms.weight * (np.abs(c) ** 2 + np.abs(s) ** 2))
        im = np.sum(terms.weight * _ordered_imag(terms))
    val = complex(re, im)
    return -val if spec.negate else val


def functional_momentum_noisy(f, xi: float, zeta: ZetaParams, grid: BoxGrid,
                              q: QuadratureConfig) -> complex:
    """``sigma[f]`` for the noise-shifted time-ordered kernel via cosine/sine transforms."""
    return functional_momentum(KernelSpec("noisy_feynman", xi=xi, zeta=zeta), f, grid, q)


def imaginary_antisymmetry_check(f, xi: float, zeta: ZetaParams, grid: BoxGrid,
                                 q: QuadratureConfig) -> float:
    """``|Re|`` of the theta-difference term of the noisy functional.

    The term ``T = 1/2 sum_ab sign(a-b) [conj(P_a) P_b - conj(Q_a) Q_b]`` is
    evaluated as an explicit time-slice matrix, once as written and once with
    the dummy indices swapped, and the two are averaged before the real part
    is taken.  Analytically the real part cancels pair by pair.
    """
    s = _samples(f, grid)
    if not np.any(s != 0):
        return 0.0
    terms = _momentum_terms(ShellKernel(xi, zeta, "noisy"), f, grid, q)
    a = np.arange(grid.n_time)
    sgn = np.sign(a[:, None] - a[None, :]).astype(float)
    P, Q = terms.P, terms.Q
    G = np.conj(P)[:, None, :] * P[None, :, :] - np.conj(Q)[:, None, :] * Q[None, :, :]
    t_ab = 0.5 * np.einsum("ab,abn->n", sgn, G)
    t_ba = 0.5 * np.einsum("ab,ban->n", sgn.T, G)
    return float(abs(np.sum(terms.weight * (0.5 * (t_ab + t_ba)).real)))


def evaluate(spec: KernelSpec, f, grid: BoxGrid, q: QuadratureConfig,
             table: np.ndarray | None = None) -> complex:
    """Momentum path when the kind has one, direct path otherwise."""
    if spec.kind in MOMENTUM_KINDS:
        return functional_momentum(spec, f, grid, q)
    return functional_direct(spec, f, grid, q, table=table)


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class FunctionResult:
    id: str
    re: float
    im: float
    error: str | None = None


@dataclass
class KernelReport:
    """Outcome of a sweep.  ``positive`` means no violation found at tolerance."""

    kernel: KernelSpec
    per_function: list
    min_re: float
    min_im: float
    verdict_re: str
    quadrature: QuadratureConfig
    tolerance: float
    scale: float
    seed: int | None = None
    path: str = "momentum"
    n_failed: int = 0

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "seed": self.seed,
            "tolerance": self.tolerance,
            "quadrature": self.quadrature.to_dict(),
            "path": self.path,
            "per_function": [
                {"id": r.id, "re": r.re, "im": r.im, "error": r.error} for r in self.per_function
            ],
            "min_re": self.min_re,
            "min_im": self.min_im,
            "scale": self.scale,
            "n_failed": self.n_failed,
            "verdict_re": self.verdict_re,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def csv_rows(self) -> list:
        """``(id, sigma_re, sigma_im, error)`` rows in sweep order."""
        return [(r.id, r.re, r.im, r.error or "") for r in self.per_function]


def verdict(min_re: float, scale: float, tolerance: float, n_failed: int, n_total: int) -> str:
    if n_total == 0 or n_failed > 0.1 * n_total or not math.isfinite(min_re):
        return "inconclusive"
    return "positive" if min_re >= -tolerance * scale else "violated"


def sweep(kernel: KernelSpec, family: list, grid: BoxGrid, q: QuadratureConfig,
          tolerance: float = 1e-8, seed: int | None = None, threads: int = 1) -> KernelReport:
    """Evaluate ``sigma[f]`` for every member of ``family`` and assemble a report."""
    if not family:
        raise ValueError("sweep needs a nonempty family")
    table = None
    if kernel.kind not in MOMENTUM_KINDS:
        table = stationary_table(kernel, grid, q)

    def one(item):
        i, f = item
        fid = f.label if isinstance(f, TestFunction) and f.label else f"f{i}"
        try:
            v = evaluate(kernel, f, grid, q, table)
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise FloatingPointError("non-finite functional value")
            return FunctionResult(fid, v.real, v.imag)
        except (ValueError, FloatingPointError, ArithmeticError) as exc:
            return FunctionResult(fid, math.nan, math.nan, f"{type(exc).__name__}: {exc}")

    items = list(enumerate(family))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]

    ok = [r for r in results if r.error is None]
    n_failed = len(results) - len(ok)
    min_re = min((r.re for r in ok), default=math.nan)
    min_im = min((r.im for r in ok), default=math.nan)
    scale = max((abs(complex(r.re, r.im)) for r in ok), default=0.0)
    return KernelReport(
        kernel=kernel,
        per_function=results,
        min_re=min_re,
        min_im=min_im,
        verdict_re=verdict(min_re, scale, tolerance, n_failed, len(results)),
        quadrature=q,
        tolerance=tolerance,
        scale=scale,
        seed=seed,
        path="momentum" if kernel.kind in MOMENTUM_KINDS else "direct",
        n_failed=n_failed,
    )
