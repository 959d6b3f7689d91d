import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisyprop.kinematics import DomainError, FourVector, ZetaParams, lambda_noisy, minkowski_dot
from noisyprop.spectral import (
    SpectralMeasure,
    graded_grid,
    inverse_laplace_expstep,
    kl_spectral_integral,
    laplace_forward,
    xi_convolution,
)


class TestMeasure:
    def test_rejects_negative_atom(self):
        with pytest.raises(DomainError):
            SpectralMeasure.atom(-0.5)

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            SpectralMeasure(grid=[0.0], values=[1.0])
        with pytest.raises(ValueError):
            SpectralMeasure(grid=[0.0, 2.0, 1.0], values=[1.0, 1.0, 1.0])
        with pytest.raises(DomainError):
            SpectralMeasure(grid=[-1.0, 1.0], values=[1.0, 1.0])
        with pytest.raises(ValueError):
            SpectralMeasure(grid=[0.0, 1.0])

    def test_json_roundtrip(self):
        m = SpectralMeasure(atoms=((1.0, 0.5), (2.5, -1.0)), grid=np.linspace(0, 3, 7),
                            values=np.exp(-np.linspace(0, 3, 7)))
        back = SpectralMeasure.from_json(m.to_json())
        assert back.atoms == m.atoms
        np.testing.assert_array_equal(back.grid, m.grid)
        np.testing.assert_array_equal(back.values, m.values)
        assert set(m.to_dict()) == {"atoms", "grid", "values"}

    def test_empty(self):
        assert SpectralMeasure.empty().is_empty
        assert laplace_forward(SpectralMeasure.empty(), 1.0) == 0.0


class TestLaplaceForward:
    def test_point_mass(self):
        assert laplace_forward(SpectralMeasure.atom(3.0, 2.0), 1.0) == pytest.approx(2 * math.exp(-3.0), rel=1e-15)

    def test_box_density(self):
        a, tau = 4.0, 0.7
        grid = np.linspace(0, a, 4001)
        m = SpectralMeasure(grid=grid, values=np.ones_like(grid))
        assert laplace_forward(m, tau) == pytest.approx((1 - math.exp(-tau * a)) / tau, rel=1e-7)

    def test_exponential_density(self):
        grid = np.linspace(0, 40, 20001)
        m = SpectralMeasure.from_density(grid, lambda x: np.exp(-x))
        assert abs(laplace_forward(m, 0.5) - 2.0 / 3.0) < 1e-6

    def test_negative_tau(self):
        with pytest.raises(DomainError):
            laplace_forward(SpectralMeasure.atom(1.0), -0.1)

    def test_array_tau(self):
        m = SpectralMeasure(atoms=((1.0, 1.0), (2.0, 3.0)))
        taus = np.array([0.0, 0.5, 1.0])
        expect = np.exp(-taus) + 3 * np.exp(-2 * taus)
        np.testing.assert_allclose(laplace_forward(m, taus), expect, rtol=1e-15)

    def test_linearity(self):
        grid = np.linspace(0, 5, 51)
        a = SpectralMeasure(atoms=((1.0, 2.0),), grid=grid, values=np.sin(grid) ** 2)
        b = SpectralMeasure(atoms=((0.5, -1.0),), grid=grid, values=np.cos(grid))
        for tau in (0.0, 0.3, 2.0):
            lhs = laplace_forward(a + b.scaled(2.5), tau)
            rhs = laplace_forward(a, tau) + 2.5 * laplace_forward(b, tau)
            assert lhs == pytest.approx(rhs, rel=1e-13)

    @given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 5)), min_size=1, max_size=6))
    def test_monotone_for_nonnegative(self, atoms):
        m = SpectralMeasure(atoms=tuple(atoms))
        vals = laplace_forward(m, np.linspace(0, 4, 30))
        assert np.all(np.diff(vals) <= 1e-15)


class TestInverse:
    def test_plain_atom(self):
        m = inverse_laplace_expstep(3.0, False)
        assert m.atoms == ((3.0, 1.0),)

    def test_half_scaling_atom(self):
        # exponent a = k^2 - 2 (zeta.k)^2 with a > 0
        k = FourVector(2.0, 0.5, 0.0, 0.0)
        z = ZetaParams.of(0.3, 0.1, 0.0, 0.0)
        zk = minkowski_dot(z.zeta, k)
        a = minkowski_dot(k, k) - 2 * zk * zk
        assert a == pytest.approx(lambda_noisy(k, z) / 2)
        assert inverse_laplace_expstep(a, True).atoms == ((a, 0.5),)

    @pytest.mark.parametrize("half", [False, True])
    def test_step_cut(self, half):
        assert inverse_laplace_expstep(-1.0, half).is_empty
        assert inverse_laplace_expstep(0.0, half).is_empty

    @given(st.floats(1e-3, 50), st.floats(0, 5))
    def test_roundtrip(self, a, tau):
        assert laplace_forward(inverse_laplace_expstep(a, False), tau) == pytest.approx(math.exp(-a * tau), rel=1e-15)

    @given(st.floats(1e-3, 50), st.floats(0, 5))
    def test_half_scaling_roundtrip(self, a, tau):
        # weight-1/2 atom: twice its transform is the original exponential
        m = inverse_laplace_expstep(a, True)
        assert 2 * laplace_forward(m, tau) == pytest.approx(math.exp(-a * tau), rel=1e-15)


class TestConvolution:
    def test_unit_functions(self):
        one = lambda x: np.ones_like(x)
        for xi in (0.0, 0.7, 3.0):
            assert xi_convolution(one, one, xi) == pytest.approx(xi, abs=1e-14)

    def test_array_xi(self):
        one = lambda x: np.ones_like(x)
        xs = np.linspace(0, 2, 5)
        np.testing.assert_allclose(xi_convolution(one, one, xs), xs, atol=1e-14)

    def test_narrow_bump(self):
        a, eps = 0.8, 1e-3
        bump = lambda x: np.exp(-0.5 * ((x - a) / eps) ** 2) / (eps * math.sqrt(2 * math.pi))
        g = lambda x: np.cos(x) + x ** 2
        xi = 2.5
        s0 = xi - a
        edges = tuple(s0 + eps * d for d in (-10, -4, -1, 0, 1, 4, 10))
        val = xi_convolution(bump, g, xi, n_panels=8, order=24, breakpoints=edges)
        # bump centred at s = xi - a; g'' correction ~ eps^2 / 2
        assert val == pytest.approx(g(xi - a), abs=1e-5)

    def test_convolution_theorem_polynomials(self):
        rng = np.random.default_rng(8)
        cf, cg = rng.normal(size=4), rng.normal(size=3)
        f = lambda x: np.polyval(cf, x)
        g = lambda x: np.polyval(cg, x)
        A = 60.0
        grid = np.linspace(0, A, 30001)
        lf = SpectralMeasure(grid=grid, values=f(grid))
        lg = SpectralMeasure(grid=grid, values=g(grid))
        conv = SpectralMeasure(grid=grid, values=xi_convolution(f, g, grid))
        for tau in (0.5, 1.0, 2.0):
            lhs = laplace_forward(conv, tau)
            rhs = laplace_forward(lf, tau) * laplace_forward(lg, tau)
            assert abs(lhs - rhs) / abs(rhs) < 1e-6

    def test_convolution_theorem_order(self):
        # smooth f, g on [0, A]; error vs grid spacing should fall at order >= 2
        f = lambda x: np.exp(-x) * (1 + np.sin(x))
        g = lambda x: np.exp(-0.5 * x)
        A, tau = 40.0, 0.8
        errs = []
        for n in (2001, 4001, 8001):
            grid = np.linspace(0, A, n)
            conv = laplace_forward(SpectralMeasure(grid=grid, values=xi_convolution(f, g, grid)), tau)
            prod = (laplace_forward(SpectralMeasure(grid=grid, values=f(grid)), tau)
                    * laplace_forward(SpectralMeasure(grid=grid, values=g(grid)), tau))
            errs.append(abs(conv - prod) / abs(prod))
        assert errs[-1] < 1e-5
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 1.9

    def test_negative_xi(self):
        with pytest.raises(DomainError):
            xi_convolution(np.cos, np.cos, -1.0)


class TestKL:
    def kernel(self, xi, x):
        return np.exp(-1j * math.sqrt(xi) * x.t) / (1.0 + xi)

    def test_single_atom(self):
        x = FourVector(0.7, 0.1)
        assert kl_spectral_integral(SpectralMeasure.atom(2.0), self.kernel, x) == self.kernel(2.0, x)

    def test_two_atoms(self):
        x = FourVector(1.3)
        m = SpectralMeasure(atoms=((1.0, 0.25), (4.0, 2.0)))
        expect = 0.25 * self.kernel(1.0, x) + 2.0 * self.kernel(4.0, x)
        assert kl_spectral_integral(m, self.kernel, x) == pytest.approx(expect, rel=1e-15)

    def test_breit_wigner_refinement(self):
        x = FourVector(0.9, 0.0, 0.2, 0.0)
        bw = lambda xi: 0.3 / ((xi - 2.0) ** 2 + 0.3 ** 2) / math.pi
        coarse = SpectralMeasure.from_density(np.linspace(0, 10, 2001), bw)
        fine = SpectralMeasure.from_density(np.linspace(0, 10, 16001), bw)
        a = kl_spectral_integral(coarse, self.kernel, x)
        b = kl_spectral_integral(fine, self.kernel, x)
        assert abs(a - b) / abs(b) < 1e-4


@settings(max_examples=25)
@given(st.floats(1.0, 100.0), st.integers(3, 50), st.floats(1.0, 3.0))
def test_graded_grid(xi_max, n, power):
    g = graded_grid(xi_max, n, power)
    assert g[0] == 0.0 and g[-1] == pytest.approx(xi_max)
    assert np.all(np.diff(g) > 0)
