"""Rate exponents, the ridge scale function, and the bias oracle."""

import math

import numpy as np
import pytest

from jumpdrift import Bandwidth, HolderParams, bias_oracle, make_kernel, phi, rate_exponent


class TestHolderParams:
    def test_harmonic_mean(self):
        p = HolderParams(beta=(1.0, 2.0, 3.0))
        assert p.beta_bar == pytest.approx(3.0 / (1.0 + 0.5 + 1.0 / 3.0))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            HolderParams(beta=(2.0, 0.0))

    def test_isotropic_constructor(self):
        p = HolderParams.isotropic(2.0, 3)
        assert p.beta == (2.0, 2.0, 2.0)
        assert p.beta_bar == pytest.approx(2.0)


class TestRateExponent:
    def test_d1_beta2(self):
        assert rate_exponent(HolderParams(beta=(2.0,))) == pytest.approx(0.4)

    def test_d2_isotropic(self):
        assert rate_exponent(HolderParams(beta=(2.0, 2.0))) == pytest.approx(1.0 / 3.0)

    def test_d3_anisotropic_hand_value(self):
        # beta_bar = 18/11, exponent = (18/11)/(36/11 + 3) = 18/69
        p = HolderParams(beta=(1.0, 2.0, 3.0))
        assert rate_exponent(p, 3) == pytest.approx(18.0 / 69.0)

    def test_permutation_symmetric(self):
        a = rate_exponent(HolderParams(beta=(1.0, 2.0, 3.0)))
        b = rate_exponent(HolderParams(beta=(3.0, 1.0, 2.0)))
        assert a == pytest.approx(b)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            rate_exponent(HolderParams(beta=(2.0,)), d=2)


class TestPhi:
    def test_d1_at_e4(self):
        T = math.exp(4.0)
        assert phi(T, 1) == pytest.approx(4.0 / math.exp(2.0))

    def test_d3(self):
        T = math.exp(5.0)
        p = HolderParams.isotropic(2.0, 3)
        assert phi(T, 3, p) == pytest.approx((5.0 / T) ** (2.0 / 5.0))

    def test_d2_ignores_beta(self):
        T = 1234.5
        a = phi(T, 2, HolderParams.isotropic(1.0, 2))
        b = phi(T, 2, HolderParams.isotropic(7.0, 2))
        assert a == b == pytest.approx(math.log(T) / math.sqrt(T))

    def test_requires_T_at_least_3(self):
        with pytest.raises(ValueError):
            phi(2.0, 1)


class TestBiasOracle:
    def test_constant_target(self):
        k = make_kernel(1)
        grid = np.linspace(-1, 1, 41).reshape(-1, 1)
        got = bias_oracle(lambda x: np.full(x.shape[:-1], 3.7), k, Bandwidth((0.3,)), grid)
        assert got < 1e-8

    def test_linear_target(self):
        k = make_kernel(1)
        grid = np.linspace(-1, 1, 41).reshape(-1, 1)
        got = bias_oracle(lambda x: 2.0 * x[..., 0] - 1.0, k, Bandwidth((0.3,)), grid)
        assert got < 1e-8

    def test_quadratic_target_triangle(self):
        # oracle: bias of x^2 under the triangle is h^2 * \int u^2 k(u) du = h^2/24
        k = make_kernel(1)
        grid = np.linspace(-1, 1, 41).reshape(-1, 1)
        for h in (0.1, 0.2, 0.4):
            got = bias_oracle(lambda x: x[..., 0] ** 2, k, Bandwidth((h,)), grid)
            assert got == pytest.approx(h * h / 24.0, rel=1e-8)

    def test_quadratic_vanishes_for_order2(self):
        k = make_kernel(2)
        grid = np.linspace(-1, 1, 21).reshape(-1, 1)
        got = bias_oracle(lambda x: x[..., 0] ** 2, k, Bandwidth((0.3,)), grid)
        assert got < 1e-10

    def test_decreasing_in_h_for_smooth_target(self):
        k = make_kernel(1)
        grid = np.linspace(-1, 1, 41).reshape(-1, 1)

        def target(x):
            return np.sin(2.0 * x[..., 0])

        vals = [bias_oracle(target, k, Bandwidth((h,)), grid)
                for h in (0.4, 0.2, 0.1, 0.05)]
        assert all(a > b for a, b in zip(vals[:-1], vals[1:]))

    def test_holder_bias_bound_stable_constant(self):
        # for a C^2 target and the order-1 kernel, bias <= c h^2 with the
        # fitted c stable across h-halvings
        k = make_kernel(1)
        grid = np.linspace(-1, 1, 41).reshape(-1, 1)

        def target(x):
            return np.cos(3.0 * x[..., 0])

        cs = []
        for h in (0.2, 0.1, 0.05):
            cs.append(bias_oracle(target, k, Bandwidth((h,)), grid) / h**2)
        assert max(cs) / min(cs) < 1.5

    def test_anisotropic_2d(self):
        # additive quadratic target: bias = (h1^2 + h2^2)/24 under the triangle
        k = make_kernel(1)
        ax = np.linspace(-1, 1, 9)
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        grid = np.stack([gx.ravel(), gy.ravel()], axis=-1)

        def target(x):
            return x[..., 0] ** 2 + x[..., 1] ** 2

        h = Bandwidth((0.2, 0.4))
        got = bias_oracle(target, k, h, grid)
        assert got == pytest.approx((0.04 + 0.16) / 24.0, rel=1e-8)
