import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from noisyprop.fields import (
    BoxGrid,
    FieldSlice,
    Mode,
    ModeLattice,
    box_normalized_mode,
    el_residual,
    energy_functional,
    kg_inner_product,
    mike_residual,
    mode_function,
    parseval_sum,
    pc_window_overlap,
    phase_evolve,
    plane_wave,
    superposition,
)
from noisyprop.kinematics import DomainError, FourVector, minkowski_dot

GRID = BoxGrid(L=2.0, n_space=8, t_window=2.0, n_time=9)


def random_lattice(rng, n, xi=1.0, grid=GRID, with_anti=True):
    picks = set()
    while len(picks) < n:
        picks.add(tuple(rng.integers(-3, 4, 3)))
    ks = np.array([grid.lattice_momentum(p, xi).to_array() for p in sorted(picks)])
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n) if with_anti else None
    return ModeLattice.from_arrays(ks, a, b)


def orders(errs):
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


class TestContainers:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            BoxGrid(1.0, 5, 1.0, 4)
        with pytest.raises(ValueError):
            BoxGrid(1.0, 2, 1.0, 4)
        with pytest.raises(ValueError):
            BoxGrid(-1.0, 4, 1.0, 4)

    def test_grid_geometry(self):
        assert GRID.hx == 0.5 and GRID.ht == 0.25 and GRID.volume == 64.0
        assert GRID.points().shape == GRID.shape + (4,)
        assert GRID.weights().sum() == pytest.approx(GRID.volume * GRID.t_window, rel=1e-14)
        fine = GRID.refined()
        assert fine.hx == GRID.hx / 2 and fine.ht == GRID.ht / 2
        np.testing.assert_array_equal(fine.time_axis()[::2], GRID.time_axis())

    def test_lattice_momentum_on_shell(self):
        k = GRID.lattice_momentum((1, -2, 0), 2.0)
        assert minkowski_dot(k, k) == pytest.approx(2.0, rel=1e-14)

    def test_lattice_rejects_outside_cone_and_duplicates(self):
        with pytest.raises(DomainError):
            ModeLattice((Mode(FourVector(1.0, 2.0)),))
        k = FourVector(2.0, 0.5)
        with pytest.raises(ValueError):
            ModeLattice((Mode(k, 1.0), Mode(k, 2.0)))


class TestModeFunction:
    k = FourVector(2.0, 0.3, -0.4, 1.0)

    def test_origin_is_normalization(self):
        assert mode_function(self.k, FourVector(0.0)) == ((2 * math.pi) ** 3 * 4.0) ** -0.5
        assert mode_function(self.k, FourVector(0.0), "pc") == 1.0 / ((2 * math.pi) ** 2 * 2.0)

    def test_modulus_and_phase(self):
        rng = np.random.default_rng(0)
        norm = ((2 * math.pi) ** 3 * 4.0) ** -0.5
        for _ in range(100):
            x = FourVector(*rng.normal(size=4) * 3)
            val = mode_function(self.k, x)
            assert abs(val) == pytest.approx(norm, rel=1e-14)
            assert val == norm * np.exp(-1j * minkowski_dot(self.k, x))

    def test_array_input(self):
        pts = np.random.default_rng(1).normal(size=(5, 4))
        vals = mode_function(self.k, pts)
        expect = [mode_function(self.k, FourVector(*p)) for p in pts]
        np.testing.assert_allclose(vals, expect, rtol=1e-14)

    def test_unknown_normalization(self):
        with pytest.raises(ValueError):
            mode_function(self.k, FourVector(0.0), "box")


class TestInnerProduct:
    def test_unit_norm(self):
        for n in [(0, 0, 0), (1, 0, 0), (1, -2, 3), (-3, 3, 1)]:
            m = box_normalized_mode(GRID.lattice_momentum(n, 1.0), GRID, t=0.37)
            assert abs(kg_inner_product(m, m, GRID) - 1.0) < 1e-10

    def test_distinct_modes_orthogonal(self):
        ns = [(0, 0, 0), (1, 0, 0), (0, -1, 2), (3, 3, -3)]
        modes = [box_normalized_mode(GRID.lattice_momentum(n, 1.0), GRID, t=0.1) for n in ns]
        for i, a in enumerate(modes):
            for b in modes[i + 1:]:
                assert abs(kg_inner_product(a, b, GRID)) < 1e-10

    def test_parseval(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            lat = random_lattice(rng, 5, xi=rng.uniform(0.2, 3.0), with_anti=False)
            a = lat.particle
            b = rng.normal(size=5) + 1j * rng.normal(size=5)
            t = rng.uniform(-1, 1)
            phi = superposition(lat.momenta, a, GRID, t)
            psi = superposition(lat.momenta, b, GRID, t)
            lhs = kg_inner_product(phi, psi, GRID)
            rhs = parseval_sum(lat.momenta, a, b, GRID)
            assert abs(lhs - rhs) / abs(rhs) < 1e-8

    @settings(max_examples=30)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_hermitian_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        lat = random_lattice(rng, 4, with_anti=False)
        phi = superposition(lat.momenta, lat.particle, GRID, 0.2)
        psi = superposition(lat.momenta, rng.normal(size=4) + 0j, GRID, 0.2)
        ab = kg_inner_product(phi, psi, GRID)
        ba = kg_inner_product(psi, phi, GRID)
        assert abs(ab - np.conj(ba)) <= 1e-12 * max(1.0, abs(ab))

    def test_sesquilinear(self):
        rng = np.random.default_rng(3)
        lat = random_lattice(rng, 3, with_anti=False)
        f = superposition(lat.momenta, lat.particle, GRID, 0.0)
        g = box_normalized_mode(GRID.lattice_momentum((1, 1, 0), 1.0), GRID)
        c = 0.7 - 1.3j
        scaled = FieldSlice(c * f.value, c * f.dot)
        assert kg_inner_product(scaled, g, GRID) == pytest.approx(np.conj(c) * kg_inner_product(f, g, GRID), abs=1e-14)
        assert kg_inner_product(g, scaled, GRID) == pytest.approx(c * kg_inner_product(g, f, GRID), abs=1e-14)

    def test_two_slice_sampling_converges(self):
        k = GRID.lattice_momentum((1, 0, 2), 1.0)
        errs = []
        for dt in (0.1, 0.05, 0.025):
            slices = np.stack([box_normalized_mode(k, GRID, t).value for t in (-dt / 2, dt / 2)])
            errs.append(abs(kg_inner_product(slices, slices, GRID, dt=dt) - 1.0))
        # midpoint average loses w^2 dt^2 / 8, the central difference w^2 dt^2 / 24
        predicted = k.t ** 2 * 0.025 ** 2 / 6
        assert errs[-1] == pytest.approx(predicted, rel=0.01)
        assert all(1.8 <= o <= 2.2 for o in orders(errs))

    def test_usage_errors(self):
        m = box_normalized_mode(GRID.lattice_momentum((0, 0, 0), 1.0), GRID)
        other = box_normalized_mode(FourVector(1.0), BoxGrid(2.0, 6, 2.0, 9))
        with pytest.raises(ValueError):
            kg_inner_product(m, other, GRID)
        with pytest.raises(ValueError):
            kg_inner_product(np.zeros((2, 8, 8, 8)), m, GRID)
        with pytest.raises(ValueError):
            FieldSlice.from_slices(np.zeros(3), np.zeros(4), 0.1)


class TestEulerLagrange:
    def test_on_shell_second_order(self):
        xi = 1.5
        grid = BoxGrid(2.0, 8, 2.0, 9)
        k = grid.lattice_momentum((1, 0, -1), xi)
        errs = []
        for _ in range(3):
            errs.append(np.max(np.abs(el_residual(plane_wave(k, grid), xi, grid))))
            grid = grid.refined()
        assert all(1.8 <= o <= 2.2 for o in orders(errs))

    def test_off_shell(self):
        grid = BoxGrid(2.0, 32, 2.0, 33)
        k = grid.lattice_momentum((1, 0, 0), 1.0)
        phi = plane_wave(k, grid)
        res = el_residual(phi, 3.0, grid)
        inner = phi[1:-1, 1:-1, 1:-1, 1:-1]
        # linear in xi: the off-shell excess is (xi - k^2) phi on top of the on-shell discretisation error
        np.testing.assert_allclose(res - 2.0 * inner, el_residual(phi, 1.0, grid), atol=1e-11)
        assert np.max(np.abs(res - 2.0 * inner)) < 0.05 * np.max(np.abs(2.0 * inner))

    def test_zero_field(self):
        assert not np.any(el_residual(np.zeros(GRID.shape), 2.0, GRID))

    def test_too_coarse(self):
        grid = BoxGrid(1.0, 4, 1.0, 2)
        with pytest.raises(ValueError):
            el_residual(np.zeros(grid.shape), 1.0, grid)
        with pytest.raises(ValueError):
            el_residual(np.zeros((3, 3)), 1.0, GRID)


class TestMike:
    def state(self, grid):
        k = grid.lattice_momentum((1, 0, 0), 1.0)
        return ModeLattice((Mode(k, 1.0, 0.5j),))

    def test_tau_order(self):
        s = self.state(GRID)
        errs = [mike_residual(s, 0.3, d, GRID, exact_box=True) for d in (0.1, 0.05, 0.025)]
        assert all(1.8 <= o <= 2.2 for o in orders(errs))

    def test_space_order(self):
        grid = GRID
        s = self.state(grid)
        errs = []
        for _ in range(3):
            errs.append(mike_residual(s, 0.3, 0.1, grid, exact_tau=True))
            grid = grid.refined()
        assert all(1.8 <= o <= 2.2 for o in orders(errs))

    def test_analytic_derivative_matches_box(self):
        assert mike_residual(self.state(GRID), 0.3, 0.1, GRID, exact_tau=True, exact_box=True) == 0.0

    def test_empty(self):
        assert mike_residual(ModeLattice(), 0.3, 0.1, GRID) == 0.0

    def test_bad_tau(self):
        with pytest.raises(DomainError):
            mike_residual(self.state(GRID), 0.0, 0.1, GRID)


class TestEnergy:
    def test_single_mode(self):
        assert energy_functional(ModeLattice((Mode(FourVector(2.0), 1.0),))) == 2.0

    def test_empty(self):
        assert energy_functional(ModeLattice()) == 0.0

    def test_random_against_independent_sum(self):
        rng = np.random.default_rng(50)
        lat = random_lattice(rng, 50, xi=0.7, grid=BoxGrid(5.0, 8, 1.0, 4))
        terms = [m.k.t * (abs(m.particle) ** 2 + abs(m.antiparticle) ** 2) for m in lat.modes]
        rng.shuffle(terms)
        assert energy_functional(lat) == math.fsum(terms)

    def test_phase_identity_and_group_law(self):
        lat = random_lattice(np.random.default_rng(8), 6)
        assert phase_evolve(lat, 0.0) == lat
        two = phase_evolve(phase_evolve(lat, 0.4), 1.1)
        one = phase_evolve(lat, 1.5)
        np.testing.assert_allclose(two.particle, one.particle, rtol=1e-14)
        np.testing.assert_allclose(two.antiparticle, one.antiparticle, rtol=1e-14)

    def test_phases(self):
        k = FourVector(2.0, 1.0)
        out = phase_evolve(ModeLattice((Mode(k, 1.0, 1.0),)), 0.5)
        assert out.particle[0] == np.exp(-1j) and out.antiparticle[0] == np.exp(1j)

    def test_conservation(self):
        rng = np.random.default_rng(9)
        lat = random_lattice(rng, 10)
        e0 = energy_functional(lat)
        mods = np.abs(lat.particle)
        for t in rng.uniform(-50, 50, 100):
            lat = phase_evolve(lat, t)
        assert abs(energy_functional(lat) - e0) / e0 < 1e-12
        np.testing.assert_allclose(np.abs(lat.particle), mods, rtol=1e-13)


class TestWindowedOverlap:
    kvec = np.array([0.5, 0.0, 1.0])

    def test_peak(self):
        w = math.sqrt(1.25 + 2.0)
        for T in (20.0, 80.0):
            assert pc_window_overlap(self.kvec, 2.0, 2.0, T) == pytest.approx(T / (4 * math.pi * w), rel=1e-12)
            assert pc_window_overlap(self.kvec, 2.0, 2.3, T) < pc_window_overlap(self.kvec, 2.0, 2.0, T)

    def test_width_scales_inversely(self):
        def first_zero(T):
            # first node of the sinc-like profile above xi = 2
            f = lambda x: pc_window_overlap(self.kvec, 2.0, x, T, n_time=8001)
            return brentq(f, 2.0 + 1e-6, 2.0 + 40.0 / T) - 2.0

        widths = [first_zero(T) for T in (200.0, 400.0, 800.0)]
        ratios = [a / b for a, b in zip(widths, widths[1:])]
        assert all(abs(r - 2.0) < 0.05 for r in ratios)
