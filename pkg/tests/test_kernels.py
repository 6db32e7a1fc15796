"""Kernel construction, product/convolved evaluation, and bandwidth lattices."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from jumpdrift import (
    Bandwidth,
    EmptyGridError,
    eval_convolved,
    eval_product,
    grid_HT,
    grid_scriptHT,
    make_kernel,
)
from jumpdrift.kernels import convolved_1d


def quad_moment(kernel, power):
    """Independent oracle: adaptive quadrature of x^power * k(x)."""
    val, _ = integrate.quad(lambda x: x**power * kernel.evaluator(x),
                            -0.5, 0.5, points=[0.0], limit=200)
    return val


def brute_conv_1d(kernel, h, eta, u):
    """Independent oracle: adaptive quadrature of the scaled convolution."""
    lo = max(-h / 2, u - eta / 2)
    hi = min(h / 2, u + eta / 2)
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(
        lambda t: kernel.evaluator(t / h) / h * kernel.evaluator((u - t) / eta) / eta,
        lo, hi, limit=200)
    return val


class TestMakeKernel:
    def test_triangle_closed_form(self):
        k = make_kernel(1)
        assert k.sup_norm == 2.0
        assert k.lipschitz_const == 4.0
        assert abs(quad_moment(k, 0) - 1.0) < 1e-10
        assert abs(quad_moment(k, 1)) < 1e-12
        assert abs(k.l1_norm - 1.0) < 1e-12
        # hand values of the tent
        assert k.evaluator(0.0) == 2.0
        assert k.evaluator(0.25) == pytest.approx(1.0)
        assert k.evaluator(0.6) == 0.0
        assert k.evaluator(-0.6) == 0.0

    @pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
    def test_moments_vanish(self, order):
        k = make_kernel(order)
        assert abs(quad_moment(k, 0) - 1.0) < 1e-10
        for i in range(1, order + 1):
            assert abs(quad_moment(k, i)) < 1e-8, f"moment {i}"

    def test_order2_vanishing_second_moment(self):
        k = make_kernel(2)
        assert abs(quad_moment(k, 2)) < 1e-8

    @pytest.mark.parametrize("order", [1, 2, 4])
    def test_symmetry(self, order):
        k = make_kernel(order)
        x = np.linspace(-0.6, 0.6, 241)
        np.testing.assert_allclose(k.evaluator(x), k.evaluator(-x), atol=1e-14)

    def test_outside_support_zero(self):
        for order in (1, 2, 5):
            k = make_kernel(order)
            assert k.evaluator(0.6) == 0.0
            assert np.all(k.evaluator(np.array([-3.0, 0.51, 12.0])) == 0.0)

    def test_higher_order_kernels_go_negative(self):
        k = make_kernel(2)
        assert k.evaluator(0.45) < 0.0


class TestBandwidth:
    def test_volume_and_logsum(self):
        b = Bandwidth((0.1, 0.2))
        assert b.volume == pytest.approx(0.02)
        assert b.log_inv_sum == pytest.approx(math.log(15.0))

    @pytest.mark.parametrize("bad", [(0.0,), (1.0,), (0.5, 1.2), (-0.1,)])
    def test_rejects_outside_unit_interval(self, bad):
        with pytest.raises(ValueError):
            Bandwidth(bad)


class TestEvalProduct:
    def test_center_value(self):
        k = make_kernel(1)
        assert eval_product(k, Bandwidth((0.5,)), np.array([0.0])) == pytest.approx(4.0)

    def test_support_boundary(self):
        k = make_kernel(1)
        h = Bandwidth((0.2, 0.4))
        assert eval_product(k, h, np.array([0.11, 0.0])) == 0.0

    def test_product_form(self):
        k = make_kernel(1)
        h = Bandwidth((0.1, 0.2))
        assert eval_product(k, h, np.array([0.0, 0.0])) == pytest.approx(200.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6),
           st.floats(0.05, 0.9), st.floats(0.05, 0.9))
    def test_symmetric_in_x(self, x1, x2, h1, h2):
        k = make_kernel(1)
        h = Bandwidth((h1, h2))
        x = np.array([x1, x2])
        assert eval_product(k, h, x) == pytest.approx(eval_product(k, h, -x), abs=1e-12)


class TestEvalConvolved:
    def test_outside_joint_support(self):
        k = make_kernel(1)
        h, eta = Bandwidth((0.2,)), Bandwidth((0.3,))
        assert eval_convolved(k, h, eta, np.array([0.26])) == pytest.approx(0.0, abs=1e-15)

    def test_unit_mass(self):
        k = make_kernel(2)
        h, eta = Bandwidth((0.2,)), Bandwidth((0.35,))
        xs = np.linspace(-0.3, 0.3, 1201)
        mass = np.trapezoid(convolved_1d(k, 0.2, 0.35, xs), xs)
        assert mass == pytest.approx(1.0, abs=1e-7)
        assert eval_convolved(k, h, eta, np.array([0.0])) == pytest.approx(
            convolved_1d(k, 0.2, 0.35, np.array([0.0]))[0])

    def test_triangle_self_convolution_at_zero(self):
        # oracle: (k_h * k_h)(0) = h^{-1} \int k(v)^2 dv = (4/3)/h
        k = make_kernel(1)
        for h in (0.1, 0.25, 0.7):
            got = convolved_1d(k, h, h, np.array([0.0]))[0]
            assert got == pytest.approx((4.0 / 3.0) / h, rel=1e-12)

    @pytest.mark.parametrize("order", [1, 2])
    def test_matches_brute_force_quadrature(self, order):
        # 200 random (h, eta, x) cases against adaptive quadrature
        k = make_kernel(order)
        rng = np.random.default_rng(20240915)
        for _ in range(200):
            h = float(rng.uniform(0.05, 0.95))
            eta = float(rng.uniform(0.05, 0.95))
            u = float(rng.uniform(-(h + eta) / 2 * 1.1, (h + eta) / 2 * 1.1))
            want = brute_conv_1d(k, h, eta, u)
            got = convolved_1d(k, h, eta, np.array([u]))[0]
            assert abs(got - want) <= 1e-6 * max(1.0, abs(want)), (h, eta, u)

    def test_multidim_factorizes(self):
        k = make_kernel(1)
        h = Bandwidth((0.2, 0.4))
        eta = Bandwidth((0.3, 0.25))
        x = np.array([0.05, -0.1])
        want = (convolved_1d(k, 0.2, 0.3, np.array([0.05]))[0]
                * convolved_1d(k, 0.4, 0.25, np.array([-0.1]))[0])
        assert eval_convolved(k, h, eta, x) == pytest.approx(want, rel=1e-12)


class TestGrids:
    def test_HT_h_bound(self):
        # log(1+T)^{-1} = 0.2 at T = e^5 - 1; h = 0.25 violates the cap
        T = math.exp(5.0) - 1.0
        member = grid_HT(T, 1)
        assert not member(np.array([0.25]))

    def test_HT_rejects_h_outside_unit(self):
        member = grid_HT(1e6, 1)
        assert not member(np.array([1.0]))

    def test_scriptHT_literal_enumeration_oracle(self):
        # oracle: direct scan of the two inequalities at T = 1e6, iota = 2
        T, iota = 1e6, 2.0
        cap = 1.0 / math.log1p(T)
        expected = []
        for kk in range(1, 40):
            h = iota ** -kk
            if h < cap and iota ** kk * math.log(iota ** kk) ** 4 <= math.sqrt(T):
                expected.append((h,))
        got = [b.h for b in grid_scriptHT(T, 1, iota=iota)]
        assert sorted(got) == sorted(expected)
        assert expected == [(0.0625,)]

    def test_scriptHT_empty_raises(self):
        with pytest.raises(EmptyGridError):
            grid_scriptHT(2000, 1)

    @pytest.mark.parametrize("log_power", [0.0, 1.0, 4.0])
    def test_nested_in_HT(self, log_power):
        # every candidate passes the continuous-class membership test
        for T, d in [(50.0, 1), (2000.0, 1), (1e6, 1), (1e7, 2)]:
            member = grid_HT(T, d, log_power=log_power)
            try:
                cands = grid_scriptHT(T, d, log_power=log_power)
            except EmptyGridError:
                continue
            for b in cands:
                assert member(b), (T, d, b.h)

    def test_sqrtT_constraint_monotone_in_T(self):
        # the volume-side constraint only loosens as T grows; the h_i cap can
        # remove large candidates, so full-set monotonicity does not hold
        T1, T2 = 3000.0, 48000.0
        c1 = {b.h for b in grid_scriptHT(T1, 1, log_power=0)}
        c2 = {b.h for b in grid_scriptHT(T2, 1, log_power=0)}
        cap2 = 1.0 / math.log1p(T2)
        surviving = {h for h in c1 if h[0] < cap2}
        assert surviving <= c2

    def test_d2_candidates_are_anisotropic(self):
        cands = grid_scriptHT(1e6, 2, log_power=0)
        hs = {b.h for b in cands}
        assert any(h[0] != h[1] for h in hs)
        assert all(len(h) == 2 for h in hs)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(3.0, 1e8))
    def test_scriptHT_sorted_by_volume(self, T):
        try:
            cands = grid_scriptHT(T, 1, log_power=0)
        except EmptyGridError:
            return
        vols = [b.volume for b in cands]
        assert vols == sorted(vols, reverse=True)
