"""Command-line experiment runner.

Every command resolves its parameters from built-in defaults, then the
``[common]`` and ``[<command>]`` sections of an INI file (``--config``),
then ``--param KEY=VALUE`` overrides, then the dedicated flags.  The
resolved values are validated by building the domain objects before any
computation starts.

Exit codes: 0 success, 1 a check or verdict failed, 2 configuration error
(nothing written, JSON error record on stderr), 3 numerical failure
(``error.json`` in the output directory and on stderr).
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fields, positivity, semigroup
from .diagnostics import commutator_diagnostics
from .kinematics import DomainError, FourVector, ZetaParams, lambda_noisy, omega, shifted_mass_shell_residual, varpi
from .propagators import KINDS, ZETA0_RATIO, KernelSpec, laplace_side, phi_tau_kernel
from .quadrature import SCHEMES, QuadratureConfig
from .reporting import jsonable, version, write_outputs
from .spectral import graded_grid

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Param:
    kind: str
    default: object
    choices: tuple = ()


def _quad(k_max=8.0, n_radial=64, n_angular=16, n_energy=64) -> dict:
    return {
        "k_max": Param("float", k_max),
        "n_radial": Param("int", n_radial),
        "n_angular": Param("int", n_angular),
        "n_energy": Param("int", n_energy),
        "scheme": Param("str", "gauss_legendre", SCHEMES),
        "collapse_isotropic": Param("bool", True),
    }


def _box(L=2.0, n_space=8, t_window=4.0, n_time=8) -> dict:
    return {
        "L": Param("float", L),
        "n_space": Param("int", n_space),
        "t_window": Param("float", t_window),
        "n_time": Param("int", n_time),
    }


COMMANDS = {
    "dispersion": {
        "xi": Param("floats", (0.5, 1.0, 2.0)),
        "zeta": Param("vec4", (0.2, 0.2, 0.0, 0.0)),
        "direction": Param("vec3", (0.0, 0.0, 1.0)),
        "k_max": Param("float", 4.0),
        "n_k": Param("int", 41),
    },
    "propagator": {
        "kind": Param("str", "feynman", KINDS),
        "xi": Param("float", 1.0),
        "tau": Param("float", 1.0),
        "xi_max": Param("float", 64.0),
        "times": Param("floats", (-1.0, 0.0, 1.0)),
        "radii": Param("floats", (0.0, 0.5, 1.0, 2.0)),
        "xi_max_ladder": Param("floats", (1.0, 2.0, 4.0, 8.0)),
        **_quad(),
    },
    "noisy-propagator": {
        "xi": Param("float", 1.0),
        "zeta": Param("vec4", (0.0, 0.0, 0.0, 0.0)),
        "times": Param("floats", (-1.0, -0.5, 0.0, 0.5, 1.0)),
        "radii": Param("floats", (0.0, 0.5, 1.0, 2.0)),
        **_quad(),
    },
    "positivity": {
        "kernel": Param("str", "feynman", KINDS),
        "xi": Param("float", 1.0),
        "tau": Param("float", 1.0),
        "zeta": Param("vec4", (0.0, 0.0, 0.0, 0.0)),
        "xi_max": Param("float", 64.0),
        "negate": Param("bool", False),
        "family": Param("str", "packets", ("packets", "noise", "mixed")),
        "n_functions": Param("int", 200),
        "carrier_max": Param("float", 2.0),
        **_box(),
        **_quad(k_max=4.0, n_radial=24, n_angular=16, n_energy=24),
    },
    "laplace-check": {
        "dx": Param("vectors", ((0.0, 0.0, 0.0, 0.5), (0.5, 0.0, 0.0, 0.0),
                                (1.0, 0.0, 0.5, 0.2), (-0.7, 0.3, 0.0, 0.4))),
        "taus": Param("floats", (0.2, 0.5, 1.0, 2.0)),
        "xi_max": Param("float", 64.0),
        "n_xi": Param("int", 801),
        "grid_power": Param("float", 2.0),
        "max_rel_err": Param("float", 1e-3),
        "min_order": Param("float", 1.8),
        **_quad(k_max=6.0, n_radial=96, n_energy=96),
    },
    "semigroup": {
        "zeta": Param("vec4", (0.2, 0.2, 0.0, 0.0)),
        "n_modes": Param("int", 6),
        "k_range": Param("float", 2.0),
        "taus": Param("floats", (0.1, 0.5, 1.0)),
        "hermite_order": Param("int", 60),
        "generator_steps": Param("floats", (1e-2, 5e-3, 2.5e-3, 1.25e-3)),
    },
    "mike-check": {
        "n_modes": Param("int", 2),
        "xi": Param("float", 1.0),
        "tau": Param("float", 0.3),
        "dtau": Param("float", 0.1),
        "levels": Param("int", 3),
        "order_min": Param("float", 1.8),
        "order_max": Param("float", 2.2),
        **_box(L=2.0, n_space=8, t_window=2.0, n_time=9),
    },
}

GLOBAL_KEYS = ("seed", "tolerance", "threads", "out")


def parse_value(kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "str":
            return raw
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind in ("vec4", "vec3"):
            vals = tuple(float(v) for v in raw.split(","))
            if len(vals) != int(kind[-1]):
                raise ValueError(f"expected {kind[-1]} components")
            return vals
        if kind == "vectors":
            return tuple(parse_value("vec4", part) for part in raw.split(";") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {kind}: {exc}") from None
    raise ConfigError(f"unknown parameter kind {kind!r}")


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    tolerance: float = 1e-8
    threads: int = 1
    out: Path = Path("out")
    figures: bool = False
    source: str | None = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": dict(sorted(self.params.items())),
            "seed": self.seed,
            "tolerance": self.tolerance,
            "threads": self.threads,
        }


def resolve(args: argparse.Namespace) -> RunConfig:
    schema = COMMANDS[args.command]
    params = {k: p.default for k, p in schema.items()}
    globals_ = {"seed": 0, "tolerance": 1e-8, "threads": 1, "out": "out"}
    if args.config:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            with open(args.config) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
        for section in ("common", args.command):
            if not cp.has_section(section):
                continue
            for key, raw in cp.items(section):
                if key in GLOBAL_KEYS:
                    globals_[key] = raw
                elif key in schema:
                    params[key] = parse_value(schema[key].kind, raw)
                elif section == args.command:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for item in args.param or ():
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or key not in schema:
            raise ConfigError(f"bad override {item!r} for command {args.command!r}")
        params[key] = parse_value(schema[key].kind, raw)
    for key in GLOBAL_KEYS:
        v = getattr(args, key)
        if v is not None:
            globals_[key] = v
    for key, p in schema.items():
        if p.choices and params[key] not in p.choices:
            raise ConfigError(f"{key}={params[key]!r} is not one of {p.choices}")
    try:
        seed = int(globals_["seed"])
        tolerance = float(globals_["tolerance"])
        threads = int(globals_["threads"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if threads < 1 or not tolerance >= 0:
        raise ConfigError("threads must be >= 1 and tolerance >= 0")
    return RunConfig(args.command, params, seed, tolerance, threads, Path(globals_["out"]),
                     bool(args.figures), args.config)


# ---------------------------------------------------------------------------
# validation: build every domain object up front

def _quadrature(p: dict) -> QuadratureConfig:
    return QuadratureConfig(p["k_max"], p["n_radial"], p["n_angular"], p["scheme"],
                            p["n_energy"], p["collapse_isotropic"])


def _grid(p: dict) -> fields.BoxGrid:
    return fields.BoxGrid(p["L"], p["n_space"], p["t_window"], p["n_time"])


def validate(cfg: RunConfig) -> dict:
    p = cfg.params
    built = {}
    try:
        if "zeta" in p:
            built["zeta"] = ZetaParams.of(*p["zeta"])
        if "n_radial" in p:
            built["q"] = _quadrature(p)
        if "n_space" in p:
            built["grid"] = _grid(p)
        for key in ("xi", "xi_max"):
            vals = p.get(key, ())
            for v in (vals if isinstance(vals, tuple) else (vals,)):
                if v < 0:
                    raise DomainError(f"{key} must be >= 0, got {v!r}")
        c = cfg.command
        if c == "dispersion":
            if p["n_k"] < 2 or p["k_max"] <= 0:
                raise ValueError("need n_k >= 2 and k_max > 0")
            if np.linalg.norm(p["direction"]) == 0:
                raise ValueError("direction must be nonzero")
        elif c == "propagator":
            built["spec"] = KernelSpec(p["kind"], xi=p["xi"], tau=p["tau"], xi_max=p["xi_max"])
            if any(x <= 0 for x in p["xi_max_ladder"]):
                raise DomainError("xi_max_ladder entries must be positive")
        elif c == "positivity":
            built["spec"] = KernelSpec(p["kernel"], xi=p["xi"], tau=p["tau"], zeta=built["zeta"],
                                       xi_max=p["xi_max"], negate=p["negate"])
            if p["n_functions"] < 1:
                raise ValueError("n_functions must be >= 1")
        elif c == "laplace-check":
            if p["n_xi"] < 5 or p["n_xi"] % 2 == 0:
                raise ValueError("n_xi must be odd and >= 5 (nested halving)")
            if any(t <= 0 for t in p["taus"]) or not p["dx"]:
                raise DomainError("taus must be positive and dx nonempty")
            if p["xi_max"] <= 0 or p["grid_power"] < 1:
                raise ValueError("need xi_max > 0 and grid_power >= 1")
        elif c == "semigroup":
            if p["n_modes"] < 1 or p["hermite_order"] < 2:
                raise ValueError("need n_modes >= 1 and hermite_order >= 2")
            if any(t < 0 for t in p["taus"]) or any(h <= 0 for h in p["generator_steps"]):
                raise DomainError("taus must be >= 0 and generator steps > 0")
        elif c == "mike-check":
            if p["n_modes"] < 1 or p["levels"] < 2:
                raise ValueError("need n_modes >= 1 and levels >= 2")
            if p["tau"] <= 0 or p["dtau"] <= 0 or p["dtau"] >= p["tau"]:
                raise DomainError("need 0 < dtau < tau")
            if p["n_time"] < 3:
                raise ValueError("n_time must be >= 3 for second differences")
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from None
    return built


# ---------------------------------------------------------------------------
# commands; each returns (status, results, columns, rows, dat tables)

def cmd_dispersion(cfg: RunConfig, b: dict):
    p = cfg.params
    zeta = b["zeta"]
    d = np.asarray(p["direction"], dtype=float)
    d = d / np.linalg.norm(d)
    ks = np.linspace(0.0, p["k_max"], p["n_k"])
    rows, dat = [], {}
    for i, xi in enumerate(p["xi"]):
        table = []
        for k in ks:
            kv = k * d
            w = omega(kv, xi)
            vp = varpi(kv, xi, zeta)
            res = shifted_mass_shell_residual(kv, xi, zeta)
            lam = lambda_noisy(FourVector(vp, *kv), zeta)
            rows.append((xi, k, w, vp, res, lam))
            table.append((k, w, vp))
        dat[f"dispersion_{i}"] = (["k", "omega", "varpi"], table)
    res = np.array([r[4] for r in rows])
    results = {
        "max_abs_shell_residual": float(np.max(np.abs(res))),
        "min_varpi": float(min(r[3] for r in rows)),
        "anisotropy_factor": zeta.anisotropy_factor,
    }
    return EXIT_OK, results, ["xi", "k", "omega", "varpi", "shell_residual", "lambda"], rows, dat


def _pairs(p):
    return [(t, r) for t in p["times"] for r in p["radii"]]


def cmd_propagator(cfg: RunConfig, b: dict):
    p, q, spec = cfg.params, b["q"], b["spec"]
    pts = _pairs(p)
    dx = np.array([[t, 0.0, 0.0, r] for t, r in pts]).reshape(-1, 4)
    vals = np.atleast_1d(spec.of_difference(dx, q))
    rows = [(t, r, complex(v)) for (t, r), v in zip(pts, vals)]
    dat = {}
    for j, t in enumerate(p["times"]):
        dat[f"propagator_t{j}"] = (["r", "value"], [(r, v) for tt, r, v in rows if tt == t])
    results = {"kernel": spec.to_dict(), "n_points": len(rows)}
    if spec.kind.startswith("commutator"):
        results["diagnostics"] = commutator_diagnostics(q, p["xi"], p["radii"], p["xi_max_ladder"])
    return EXIT_OK, results, ["t", "r", "value"], rows, dat


def cmd_noisy_propagator(cfg: RunConfig, b: dict):
    p, q, zeta = cfg.params, b["q"], b["zeta"]
    noisy = KernelSpec("noisy_feynman", xi=p["xi"], zeta=zeta)
    free = KernelSpec("feynman", xi=p["xi"])
    pts = _pairs(p)
    dx = np.array([[t, 0.0, 0.0, r] for t, r in pts]).reshape(-1, 4)
    nv = np.atleast_1d(noisy.of_difference(dx, q))
    fv = np.atleast_1d(free.of_difference(dx, q))
    ratio = nv / fv
    rows = [(t, r, complex(a), complex(c), complex(z)) for (t, r), a, c, z in zip(pts, nv, fv, ratio)]
    rel_spread = float(np.max(np.abs(ratio - ratio.mean())) / abs(ratio.mean()))
    results = {
        "zeta": list(p["zeta"]),
        "ratio_mean": complex(ratio.mean()),
        "ratio_rel_spread": rel_spread,
        "zeta0_reference_ratio": ZETA0_RATIO,
    }
    dat = {"noisy_ratio": (["index", "ratio"], [(i, complex(z)) for i, z in enumerate(ratio)])}
    return EXIT_OK, results, ["t", "r", "noisy", "free", "ratio"], rows, dat


def cmd_positivity(cfg: RunConfig, b: dict):
    p, q, grid, spec = cfg.params, b["q"], b["grid"], b["spec"]
    rng = np.random.default_rng(cfg.seed)
    n = p["n_functions"]
    if p["family"] == "packets":
        fam = positivity.gaussian_packet_family(rng, n, grid, p["carrier_max"])
    elif p["family"] == "noise":
        fam = positivity.smoothed_noise_family(rng, n, grid)
    else:
        fam = (positivity.gaussian_packet_family(rng, n - n // 2, grid, p["carrier_max"])
               + positivity.smoothed_noise_family(rng, n // 2, grid))
    report = positivity.sweep(spec, fam, grid, q, cfg.tolerance, cfg.seed, cfg.threads)
    if report.verdict_re == "inconclusive":
        raise NumericalFailure(f"{report.n_failed} of {n} evaluations failed")
    status = EXIT_CHECK_FAILED if report.verdict_re == "violated" else EXIT_OK
    rows = report.csv_rows()
    dat = {"sigma": (["index", "sigma"], [(i, complex(r.re, r.im)) for i, r in enumerate(report.per_function)])}
    return status, report.to_dict(), ["id", "sigma_re", "sigma_im", "error"], [
        (i, re, im, e) for i, re, im, e in rows], dat


def cmd_laplace_check(cfg: RunConfig, b: dict):
    p, q = cfg.params, b["q"]
    fine = graded_grid(p["xi_max"], p["n_xi"], p["grid_power"])
    coarse = graded_grid(p["xi_max"], (p["n_xi"] + 1) // 2, p["grid_power"])
    rows, ok = [], True
    for dx in p["dx"]:
        d = FourVector(*dx)
        for tau in p["taus"]:
            rhs = phi_tau_kernel(d, tau, q, p["xi_max"])
            lhs = laplace_side(d, tau, fine, q)
            lhs_c = laplace_side(d, tau, coarse, q)
            err = abs(lhs - rhs) / abs(rhs)
            err_c = abs(lhs_c - rhs) / abs(rhs)
            order = math.log2(err_c / err) if err > 0 and err_c > 0 else math.inf
            passed = err < p["max_rel_err"] and order >= p["min_order"]
            ok &= passed
            rows.append((*dx, tau, lhs, rhs, err, err_c, order, passed))
    results = {
        "max_rel_err": max(r[7] for r in rows),
        "min_order": min(r[9] for r in rows),
        "passed": ok,
        "n_xi": p["n_xi"],
    }
    dat = {"laplace_errors": (["index", "rel_err", "rel_err_coarse"], [(i, r[7], r[8]) for i, r in enumerate(rows)])}
    cols = ["dt", "dx", "dy", "dz", "tau", "lhs", "rhs", "rel_err", "rel_err_coarse", "order", "passed"]
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), results, cols, rows, dat


def random_lattice(rng: np.random.Generator, n: int, k_range: float) -> np.ndarray:
    ks = rng.uniform(-k_range, k_range, (n, 3))
    xi = rng.uniform(0.2, 2.0, n)
    return np.column_stack([omega(ks, xi), ks])


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def _orders(errs):
    return [math.log2(a / b) if a > 0 and b > 0 else math.inf for a, b in zip(errs, errs[1:])]


def cmd_semigroup(cfg: RunConfig, b: dict):
    p, zeta = cfg.params, b["zeta"]
    rng = np.random.default_rng(cfg.seed)
    rho = semigroup.CoeffMatrix(random_lattice(rng, p["n_modes"], p["k_range"]),
                                random_hermitian(rng, p["n_modes"]))
    filtered = semigroup.stability_filter(rho, zeta)
    kept = semigroup.stable_mask(rho, zeta)
    base = np.abs(rho.rho)
    rows = []
    for tau in p["taus"]:
        step = semigroup.full_semigroup_step(rho, zeta, tau)
        fstep = semigroup.full_semigroup_step(filtered, zeta, tau)
        law = semigroup.full_semigroup_step(semigroup.full_semigroup_step(rho, zeta, tau), zeta, tau)
        law_err = float(np.max(np.abs(law.rho - semigroup.full_semigroup_step(rho, zeta, 2 * tau).rho)) / np.max(np.abs(law.rho)))
        kc = semigroup.gaussian_kraus_map(rho, zeta, tau)
        kq = semigroup.gaussian_kraus_map(rho, zeta, tau, "quadrature", p["hermite_order"])
        kraus_err = float(np.max(np.abs(kq.rho - kc.rho) / np.abs(kc.rho)))
        herm = float(np.max(np.abs(step.rho - step.rho.conj().T)))
        growth = float(np.max(np.abs(step.rho) / base))
        kept2 = np.outer(kept, kept)
        fgrowth = float(np.max(np.abs(fstep.rho[kept2]) / base[kept2])) if kept.any() else 0.0
        rows.append((tau, growth, fgrowth, law_err, kraus_err, herm))
    if not np.all(np.isfinite(np.array(rows, dtype=float))):
        raise NumericalFailure("unfiltered semigroup step overflowed; reduce taus or zeta")
    gen = semigroup.nested_anticommutator(rho, zeta).rho
    errs = []
    for h in p["generator_steps"]:
        fd = (semigroup.gaussian_kraus_map(rho, zeta, h).rho - rho.rho) / h
        errs.append(float(np.max(np.abs(fd - gen))))
    results = {
        "n_modes": p["n_modes"],
        "n_retained": int(kept.sum()),
        "lambda_diag": [lambda_noisy(k, zeta) for k in rho.momenta],
        "generator_sign": "+",
        "generator_errors": errs,
        "generator_orders": _orders(errs),
        "max_filtered_growth": max(r[2] for r in rows),
        "lattice": rho.lattice,
    }
    cols = ["tau", "max_growth", "max_growth_filtered", "semigroup_law_err", "kraus_quadrature_err", "hermiticity_err"]
    dat = {"semigroup": (["tau", "max_growth", "max_growth_filtered"], [r[:3] for r in rows])}
    return EXIT_OK, results, cols, rows, dat


def cmd_mike_check(cfg: RunConfig, b: dict):
    p, grid = cfg.params, b["grid"]
    rng = np.random.default_rng(cfg.seed)
    half = grid.n_space // 2
    ns = set()
    while len(ns) < p["n_modes"]:
        ns.add(tuple(int(v) for v in rng.integers(-min(2, half - 1), min(2, half - 1) + 1, 3)))
    ks = np.array([grid.lattice_momentum(n, p["xi"]).to_array() for n in sorted(ns)])
    amps = rng.normal(size=len(ks)) + 1j * rng.normal(size=len(ks))
    state = fields.ModeLattice.from_arrays(ks, amps, 0.5 * np.conj(amps))
    k1 = FourVector.from_array(ks[0])

    rows, mike, el, vn = [], [], [], []
    g, dtau = grid, p["dtau"]
    for level in range(p["levels"]):
        mike.append(fields.mike_residual(state, p["tau"], dtau, g))
        el.append(float(np.max(np.abs(fields.el_residual(fields.plane_wave(k1, g), p["xi"], g)))))
        vn.append(semigroup.von_neumann_residual(state, p["tau"], dtau))
        rows.append((level, g.hx, g.ht, dtau, mike[-1], el[-1], vn[-1]))
        g, dtau = g.refined(), 0.5 * dtau
    orders = {"mike": _orders(mike), "el": _orders(el), "von_neumann": _orders(vn)}
    lo, hi = p["order_min"], p["order_max"]
    ok = all(lo <= o <= hi for v in orders.values() for o in v)
    results = {"momenta": ks, "orders": orders, "passed": ok, "order_band": [lo, hi]}
    cols = ["level", "hx", "ht", "dtau", "mike_residual", "el_residual", "von_neumann_residual"]
    dat = {"residuals": (["level", "mike", "el", "von_neumann"], [(r[0], r[4], r[5], r[6]) for r in rows])}
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), results, cols, rows, dat


HANDLERS = {
    "dispersion": cmd_dispersion,
    "propagator": cmd_propagator,
    "noisy-propagator": cmd_noisy_propagator,
    "positivity": cmd_positivity,
    "laplace-check": cmd_laplace_check,
    "semigroup": cmd_semigroup,
    "mike-check": cmd_mike_check,
}


def _check_finite(obj, path="results"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(obj, np.ndarray):
        if obj.dtype.kind in "fc" and not np.all(np.isfinite(obj)):
            raise NumericalFailure(f"non-finite value in {path}")
    elif isinstance(obj, (float, complex, np.floating, np.complexfloating)):
        if not np.isfinite(obj):
            raise NumericalFailure(f"non-finite value in {path}")


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisyprop", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {version()}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, schema in COMMANDS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="INI file with [common] and [%s] sections" % name)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default: ./out)")
        sp.add_argument("--tolerance", type=float, help="scale-relative positivity tolerance")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--figures", action="store_true", help="also render PNGs (needs matplotlib)")
        sp.add_argument("--param", "-p", action="append", metavar="KEY=VALUE",
                        help="override a parameter; keys: " + ", ".join(schema))
    return ap


def _error_record(kind: str, code: int, message: str) -> dict:
    return {"status": kind, "exit_code": code, "message": message, "version": version()}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        built = validate(cfg)
    except ConfigError as exc:
        print(json.dumps(_error_record("config_error", EXIT_CONFIG, str(exc))), file=sys.stderr)
        return EXIT_CONFIG

    try:
        # non-finite values are detected explicitly below, not via numpy warnings
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            status, results, columns, rows, dat = HANDLERS[cfg.command](cfg, built)
        _check_finite(results)
    except (NumericalFailure, FloatingPointError, ArithmeticError, np.linalg.LinAlgError, DomainError) as exc:
        rec = _error_record("numerical_failure", EXIT_NUMERIC, f"{type(exc).__name__}: {exc}")
        rec["config"] = jsonable(cfg.to_dict())
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "error.json").write_text(json.dumps(rec, sort_keys=True, indent=2) + "\n")
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        return EXIT_NUMERIC

    resolved = cfg.to_dict()
    write_outputs(cfg.out, cfg.command, resolved, results, columns, rows, dat)
    if cfg.figures:
        try:
            from .plotting import render_tables
        except ImportError:
            print("figures skipped: matplotlib is not installed", file=sys.stderr)
        else:
            render_tables(cfg.out, dat, f"{cfg.command}: ")
    return status


if __name__ == "__main__":
    sys.exit(main())
