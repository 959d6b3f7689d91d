"""Commutator-kernel diagnostics.

These are reports, not checks.  Each entry pairs a claimed closed form
(written as a formula string) with the values the quadrature produces.
"""

from __future__ import annotations

import numpy as np

from .kinematics import FourVector
from .propagators import KernelSpec, _cone_integral, commutator_kernel
from .quadrature import QuadratureConfig

CLAIM_FIXED_MASS = "[phi(t,x), phi^dagger(t,y)] = i delta^3(x - y)"
CLAIM_CUTOFF = "[phi(t,x), phi^dagger(t,y)] = i (2 pi)^3 delta^3(x - y) * xi_max"


def commutator_diagnostics(q: QuadratureConfig, xi: float = 1.0, radii=(0.0, 0.5, 1.0),
                           xi_max_ladder=(1.0, 2.0, 4.0, 8.0), probe=(0.5, 0.0, 0.0, 0.0)) -> dict:
    """Equal-time commutator values and their dependence on the energy cutoff.

    The equal-time integrand is odd under ``k -> -k``, so the computed
    equal-time values are expected to vanish.  ``probe`` records the cutoff
    kernel at one fixed separation for each ``xi_max``.  ``coincident`` is the
    un-antisymmetrised cone integral ``int d^3k int dk0`` at ``dx = 0``,
    i.e. the size of a single branch, and ``loglog_slope`` is its
    least-squares growth exponent in ``xi_max``.
    """
    fixed = KernelSpec("commutator_fixed_mass", xi=xi)
    fixed_vals = [commutator_kernel(FourVector(0.0, 0.0, 0.0, r), fixed, q) for r in radii]

    ladder = []
    for xm in xi_max_ladder:
        spec = KernelSpec("commutator_cutoff", xi_max=xm)
        eq = [commutator_kernel(FourVector(0.0, 0.0, 0.0, r), spec, q) for r in radii]
        at_probe = commutator_kernel(FourVector(*probe), spec, q)
        coincident = float(_cone_integral(np.zeros((1, 4)), 0.0, q, xm)[0].real)
        ladder.append({"xi_max": xm, "equal_time": eq, "probe": at_probe, "coincident": coincident})

    mags = np.array([e["coincident"] for e in ladder])
    xs = np.array(xi_max_ladder, dtype=float)
    slope = float(np.polyfit(np.log(xs), np.log(mags), 1)[0]) if np.all(mags > 0) and len(xs) > 1 else None

    return {
        "fixed_mass": {
            "claim": CLAIM_FIXED_MASS,
            "xi": xi,
            "radii": list(radii),
            "equal_time": fixed_vals,
            "max_abs_equal_time": max(abs(v) for v in fixed_vals),
        },
        "cutoff": {
            "claim": CLAIM_CUTOFF,
            "claimed_scaling_exponent": 1.0,
            "radii": list(radii),
            "ladder": ladder,
            "max_abs_equal_time": max(abs(v) for e in ladder for v in e["equal_time"]),
            "probe_dx": list(probe),
            "loglog_slope": slope,
        },
    }
