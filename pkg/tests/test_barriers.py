import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import betainc

from fraclap.barriers import (
    BarrierParams,
    DecayResult,
    barrier_f,
    barrier_fM,
    barrier_gM,
    comparison_holds,
    decay_check,
    decay_params,
    poisson_mass,
    solve_decay_scenario,
    supersolution_wdelta,
)
from fraclap.core import Field, ProblemParams
from fraclap.solver import build_grid


def f_oracle(x, b):
    """f through the regularized incomplete beta function (t = tan phi)."""
    z = x * x / (1 + x * x)
    half = 0.5 * betainc(0.5, 0.5 * (b - 1), z)
    return 0.5 + math.copysign(half, x)


params = st.builds(BarrierParams, a=st.floats(-0.9, 0.9), p=st.floats(0.3, 3.0),
                   M=st.floats(1.0, 1e3))


class TestParams:
    def test_derived(self):
        bp = BarrierParams(a=0.0, p=1.0, M=16.0)
        assert bp.b == 2.0 and bp.s == 0.5
        assert bp.c == pytest.approx(1 / math.pi, rel=1e-14)
        assert bp.scale == pytest.approx(16.0)

    @pytest.mark.parametrize("kw", [dict(a=1.0, p=1), dict(a=0, p=0), dict(a=0, p=1, M=0),
                                    dict(a=0, p=1, delta=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            BarrierParams(**kw)

    @settings(max_examples=30)
    @given(params)
    def test_normalization_by_quadrature(self, bp):
        mass, _ = quad(lambda t: (1 + t * t) ** (-bp.b / 2), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13)
        assert bp.c * mass == pytest.approx(1.0, rel=1e-8)


class TestF:
    def test_arctan_closed_form(self):
        bp = BarrierParams(a=0.0, p=1.0)
        x = np.array([-20.0, -3.0, -1.0, -0.2, 0.0, 0.5, 1.0, 4.0, 50.0])
        exact = 0.5 + np.arctan(x) / math.pi
        assert np.max(np.abs(barrier_f(x, bp) - exact)) <= 1e-10
        assert barrier_f(1.0, bp) == pytest.approx(0.75, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(params, st.floats(-1e3, 1e3))
    def test_against_incomplete_beta(self, bp, x):
        assert barrier_f(x, bp) == pytest.approx(f_oracle(x, bp.b), abs=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(params)
    def test_shape(self, bp):
        assert barrier_f(0.0, bp) == pytest.approx(0.5, abs=1e-12)
        assert barrier_f(-np.inf, bp) == 0.0 and barrier_f(np.inf, bp) == 1.0
        # algebraic tails: f(-X) ~ c X^(1-b) / (b-1)
        X = 1e12
        tail = bp.c * X ** (1 - bp.b) / (bp.b - 1)
        assert barrier_f(-X, bp) == pytest.approx(tail, rel=1e-6)
        assert 1 - barrier_f(X, bp) == pytest.approx(tail, rel=1e-3, abs=1e-15)
        x = np.linspace(-10, 10, 41)
        assert np.all(np.diff(barrier_f(x, bp)) > 0)

    def test_scaled(self):
        bp = BarrierParams(a=0.0, p=1.0, M=10.0)
        assert barrier_fM(0.1, bp) == pytest.approx(0.75, abs=1e-12)


class TestG:
    @settings(max_examples=30, deadline=None)
    @given(params, st.floats(0, 5))
    def test_symmetric(self, bp, x):
        assert barrier_gM(x, bp) == pytest.approx(barrier_gM(-x, bp), abs=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(params, st.floats(1.0, 50.0))
    def test_half_outside(self, bp, x):
        assert barrier_gM(x, bp) >= 0.5 - 1e-12
        assert barrier_gM(2.0, bp) >= barrier_fM(1.0, bp) - 1e-14 >= 0.5 - 1e-12

    def test_center_vanishes(self):
        g0 = [barrier_gM(0.0, BarrierParams(a=0.0, p=1.0, M=M)) for M in (1, 10, 100, 1000)]
        assert np.all(np.diff(g0) < 0) and g0[-1] < 1e-3
        # two copies of f at -M^(1/2s)
        assert g0[1] == pytest.approx(2 * (0.5 + math.atan(-10) / math.pi), abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-0.9, 0.9), st.floats(0.3, 3.0), st.floats(1.0, 1e3))
    def test_center_bound(self, a, p, M):
        # g_M <= C M^(-1/p) on (-1/2, 1/2); C is a generous fixed constant
        bp = BarrierParams(a=a, p=p, M=M)
        x = np.linspace(-0.5, 0.5, 11)
        assert np.max(barrier_gM(x, bp)) <= 50.0 * M ** (-1 / p)


class TestW:
    def test_poisson_mass(self):
        for a in (-0.5, 0.0, 0.5):
            ref, _ = quad(lambda t: (1 + t * t) ** (-(2 - a) / 2), -np.inf, np.inf)
            assert poisson_mass(a) == pytest.approx(ref, rel=1e-10)
        assert poisson_mass(0.0) == pytest.approx(math.pi)

    @pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
    def test_constants_reproduced(self, a):
        bp = BarrierParams(a=a, p=2.0, M=4.0, delta=0.3)
        for x, y in ((0.0, 0.5), (1.3, 2.0), (-0.7, 1e-3)):
            assert supersolution_wdelta(x, y, bp, g=lambda t: 1.0) == pytest.approx(1.15, abs=1e-8)

    @pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
    def test_boundary_limit(self, a):
        bp = BarrierParams(a=a, p=1.0, M=3.0)
        for x in (0.0, 0.6, 1.5):
            g = barrier_gM(x, bp)
            e4 = abs(supersolution_wdelta(x, 1e-4, bp) - g)
            e6 = abs(supersolution_wdelta(x, 1e-6, bp) - g)
            # the extension approaches its trace like y^(2s)
            c4 = e4 / 1e-4 ** (2 * bp.s)
            c6 = e6 / 1e-6 ** (2 * bp.s)
            assert c4 <= 2.0 and c6 == pytest.approx(c4, rel=0.05)
            assert supersolution_wdelta(x, 0.0, bp) == g

    def test_harmonic_case(self):
        # a = 0 and g = indicator of x > 0: P_y * g = 1/2 + arctan(x / y) / pi
        bp = BarrierParams(a=0.0, p=1.0)
        g = lambda t: 1.0 if t > 0 else 0.0
        for x, y in ((0.3, 0.4), (-1.0, 2.0)):
            exact = 0.5 + math.atan(x / y) / math.pi
            assert supersolution_wdelta(x, y, bp, g=g) == pytest.approx(exact, abs=1e-8)

    def test_monotone_in_delta(self):
        vals = [supersolution_wdelta(0.2, 0.3, BarrierParams(a=0.2, p=1.0, M=5.0, delta=d))
                for d in (0.0, 0.1, 0.5)]
        assert np.all(np.diff(vals) > 0)

    def test_negative_height(self):
        with pytest.raises(ValueError):
            supersolution_wdelta(0.0, -1.0, BarrierParams(a=0.0, p=1.0))


class TestDecay:
    def test_zero_field(self):
        prm = decay_params(0.5, 1.0, 10.0)
        g = build_grid(-1, 1, 1, 17, 9, prm.a)
        r = decay_check(Field(prm, g, np.zeros((1,) + g.shape)), 0.0)
        assert r == DecayResult(True, 0.0, 0.0, 0.0)

    def test_weak_absorption_perturbed(self):
        fld, rep = solve_decay_scenario(0.5, 2.0, 1.0, 0.1)
        assert rep.converged
        r = decay_check(fld, 0.1)
        assert r.passed and r.margin >= 0

    @pytest.mark.xfail(strict=True, reason="measured lhs 1.5e-3 exceeds the 1e-3 bound; see notes")
    def test_strong_absorption_example(self):
        fld, rep = solve_decay_scenario(0.5, 1.0, 1e3, 0.0)
        assert rep.converged
        r = decay_check(fld, 0.0)
        assert r.passed and r.lhs <= 1e-3 * (1 + 1e-8)

    def test_strong_absorption_small_s(self):
        fld, _ = solve_decay_scenario(0.25, 1.0, 1e3, 0.0)
        assert decay_check(fld, 0.0).passed

    def test_preconditions(self):
        prm = ProblemParams(s=0.5, k=2)
        g = build_grid(-1, 1, 1, 17, 9, prm.a)
        with pytest.raises(ValueError):
            decay_check(Field(prm, g, np.zeros((2,) + g.shape)), 0.0)
        prm1 = decay_params(0.5, 1.0, 10.0, 0.2)
        with pytest.raises(ValueError, match="perturbation"):
            decay_check(Field(prm1, g, np.zeros((1,) + g.shape)), 0.1)
        small = build_grid(-0.5, 0.5, 1, 17, 9, prm.a)
        with pytest.raises(ValueError, match="half disc"):
            decay_check(Field(decay_params(0.5, 1.0, 10.0), small, np.zeros((1,) + small.shape)), 0.0)

    def test_comparison_helper(self):
        prm = decay_params(0.5, 1.0, 10.0)
        g = build_grid(-1, 1, 1, 17, 9, prm.a)
        lo = Field(prm, g, np.zeros((1,) + g.shape))
        hi = Field(prm, g, np.ones((1,) + g.shape))
        assert comparison_holds(lo, hi) and not comparison_holds(hi, lo)
        # solutions with ordered boundary data stay ordered
        u, _ = solve_decay_scenario(0.5, 1.0, 100.0, boundary_value=0.5)
        v, _ = solve_decay_scenario(0.5, 1.0, 100.0, boundary_value=1.0)
        assert comparison_holds(u, v)
