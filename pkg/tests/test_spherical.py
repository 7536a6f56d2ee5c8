import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fraclap.spherical import (
    ArcSpec,
    OptimizerConfig,
    arc_eigenvalue,
    arc_eigenvalues,
    exponent_table,
    gamma_char,
    lambda2_halfsphere,
    optimize_mu,
    optimize_nu,
    sin_weight_primitive,
)

PI = math.pi


class TestGamma:
    @pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_zero_and_unit(self, s, N):
        assert gamma_char(0.0, s, N) == 0.0
        assert gamma_char(N + 1 - 2 * s, s, N) == pytest.approx(1.0, rel=1e-14)

    def test_half(self):
        assert gamma_char(1.0, 0.5) == pytest.approx(1.0)
        assert gamma_char(0.25, 0.5) == pytest.approx(0.5)

    def test_negative(self):
        with pytest.raises(ValueError):
            gamma_char(-1e-3, 0.5)

    @settings(max_examples=100)
    @given(st.floats(0, 1e4), st.floats(1e-6, 1e3), st.floats(0.05, 0.95), st.integers(1, 4))
    def test_increasing_concave(self, t, dt, s, N):
        g0, g1, g2 = (gamma_char(t + j * dt, s, N) for j in range(3))
        assert g1 > g0
        assert g2 - g1 <= (g1 - g0) * (1 + 1e-9) + 1e-12

    def test_square_root_growth(self):
        t = np.array([1e8, 1e10, 1e12])
        np.testing.assert_allclose(gamma_char(t, 0.3, 2) / np.sqrt(t), 1.0, rtol=1e-3)


class TestArcs:
    def test_primitive(self):
        for a in (-0.5, 0.0, 0.5):
            for th in (0.3, 1.7, PI):
                ref, _ = quad(lambda t: math.sin(t) ** a, 0, th)
                assert float(sin_weight_primitive(th, a)) == pytest.approx(ref, rel=1e-10)

    def test_closed_forms(self):
        assert arc_eigenvalue(ArcSpec(0, PI), 0.0) == pytest.approx(0.0, abs=1e-10)
        assert arc_eigenvalue(ArcSpec(0, PI / 2), 0.0, 2048) == pytest.approx(1.0, abs=1e-5)
        both = ArcSpec(0, PI, force_dirichlet_lo=True, force_dirichlet_hi=True)
        assert arc_eigenvalue(both, 0.0, 2048) == pytest.approx(1.0, abs=1e-5)
        assert arc_eigenvalue(ArcSpec(0, PI, force_dirichlet_hi=True), 0.0, 2048) == \
            pytest.approx(0.25, abs=1e-5)

    @pytest.mark.parametrize("lo,hi", [(1, 0.5), (-0.1, 1), (0, 4), (1, 1)])
    def test_degenerate(self, lo, hi):
        with pytest.raises(ValueError):
            ArcSpec(lo, hi)

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            arc_eigenvalue(ArcSpec(0, 1), 0.0, 32)

    @pytest.mark.parametrize("a,expect,tol", [(0.0, 1.0, 1e-4), (0.5, 1.5, 1e-3), (-0.5, 0.5, 1e-3)])
    def test_second_eigenvalue(self, a, expect, tol):
        lam = lambda2_halfsphere(a)
        assert lam == pytest.approx(expect, abs=tol)
        assert gamma_char(lam, 0.5 * (1 - a)) == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
    def test_nested_arcs(self, a):
        his = np.linspace(0.4, PI - 0.05, 12)
        lams = [arc_eigenvalue(ArcSpec(0, h), a, 256) for h in his]
        assert np.all(np.diff(lams) < 0)
        los = np.linspace(0.1, 1.2, 8)
        lams = [arc_eigenvalue(ArcSpec(l, 2.5), a, 256) for l in los]
        assert np.all(np.diff(lams) > 0)

    def test_second_order(self):
        cases = [(ArcSpec(0, PI / 2), 1.0),
                 (ArcSpec(0, PI, force_dirichlet_lo=True, force_dirichlet_hi=True), 1.0)]
        for arc, exact in cases:
            err = [abs(arc_eigenvalue(arc, 0.0, n) - exact) for n in (64, 128, 256, 512)]
            orders = np.log2(np.array(err[:-1]) / np.array(err[1:]))
            assert np.all(orders >= 1.9)
        # lambda_2 = 1 + a with the singular weight
        err = [abs(float(arc_eigenvalues(ArcSpec(0, PI), -0.5, n, 2)[1]) - 0.5) for n in (128, 256, 512)]
        assert np.all(np.log2(np.array(err[:-1]) / np.array(err[1:])) >= 1.9)


class TestExponents:
    def test_mu_half(self):
        r = optimize_mu(0.5)
        assert r.value == pytest.approx(1.0, abs=0.01)
        assert r.argmin[0] == pytest.approx(PI / 2, abs=1e-3)
        assert r.value == min(v for _, v in r.optimizer_trace)

    @pytest.mark.parametrize("s", [0.25, 0.75])
    def test_mu_bounds(self, s):
        assert 0.49 <= optimize_mu(s).value <= 1.01

    @pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
    def test_nu(self, s):
        nu = optimize_nu(s).value
        assert 0 < nu <= s + 0.01
        assert nu <= optimize_mu(s).value

    def test_nu_half_closed_form(self):
        assert optimize_nu(0.5, 1024).value == pytest.approx(0.5, abs=0.01)

    def test_table(self):
        rows = exponent_table([0.5], 256, OptimizerConfig(xtol=1e-3))
        s, nu, mu, th = rows[0]
        assert s == 0.5 and nu <= mu and mu == pytest.approx(1.0, abs=0.01)
        assert th == pytest.approx(PI / 2, abs=1e-2)
