import math

import numpy as np
import pytest
from scipy.special import gamma

from tfphase.fracops import (
    FractionalOrder,
    SolveHistory,
    caputo_exact_monomial,
    l1_apply,
    l1_apply_direct,
    l1_weights,
    l2_apply,
    l2_apply_direct,
    l2_coefficients,
)

ALPHAS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def observed_orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


class TestFractionalOrder:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5, float("nan")])
    def test_rejects_outside_open_interval(self, alpha):
        with pytest.raises(ValueError):
            FractionalOrder(alpha)

    def test_accepted_values_pass_through(self):
        assert float(FractionalOrder(0.25)) == 0.25
        assert l1_weights(FractionalOrder(0.5), 1.0, 2).alpha == 0.5


class TestL1Weights:
    def test_first_weights_alpha_half(self):
        w = l1_weights(0.5, 1.0, 2)
        assert w.b[0] == pytest.approx(1.1283792, abs=1e-7)
        assert w.b[1] == pytest.approx(0.4673900, abs=1e-7)
        assert w.b[0] == pytest.approx(1.0 / gamma(1.5), rel=1e-15)
        assert w.b[1] == pytest.approx((math.sqrt(2) - 1) / gamma(1.5), rel=1e-14)

    def test_alpha_to_one_limit(self):
        dt = 0.1
        w = l1_weights(1 - 1e-9, dt, 5)
        assert w.b[0] == pytest.approx(1 / dt, rel=1e-7)
        assert np.all(np.abs(w.b[1:]) < 1e-7)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_positive_strictly_decreasing(self, alpha):
        b = l1_weights(alpha, 0.37, 257).b
        assert np.all(b > 0)
        assert np.all(np.diff(b) < 0)

    def test_large_index_matches_extended_precision(self):
        import mpmath

        w = l1_weights(0.3, 1.0, 100_001)
        with mpmath.workdps(40):
            k = mpmath.mpf(100_000)
            exact = ((k + 1) ** mpmath.mpf(0.7) - k ** mpmath.mpf(0.7)) / mpmath.gamma(mpmath.mpf(1.7))
        assert w.b[-1] == pytest.approx(float(exact), rel=1e-13)

    @pytest.mark.parametrize("dt, n", [(0.0, 3), (-1.0, 3), (0.1, 0)])
    def test_rejects_bad_arguments(self, dt, n):
        with pytest.raises(ValueError):
            l1_weights(0.5, dt, n)

    def test_recast_weights_sum_to_b0(self):
        w = l1_weights(0.4, 0.2, 30)
        for n in (1, 2, 17, 30):
            r = w.recast(n)
            assert np.all(r > 0)
            assert r.sum() == pytest.approx(w.b[0], rel=1e-13)

    def test_recast_range(self):
        w = l1_weights(0.4, 0.2, 3)
        with pytest.raises(ValueError):
            w.recast(4)


class TestL1Apply:
    def test_constant_history_gives_zero(self):
        hist = np.full((6, 3, 3), 2.5)
        w = l1_weights(0.6, 0.1, 5)
        np.testing.assert_allclose(l1_apply(hist, w), 0.0, atol=1e-12)

    def test_single_step(self):
        w = l1_weights(0.5, 1.0, 1)
        u = np.array([[0.0, 1.0], [2.0, -1.0]])
        v = np.array([[1.0, 3.0], [2.0, 0.0]])
        np.testing.assert_allclose(l1_apply(np.stack([u, v]), w), w.b[0] * (v - u), rtol=1e-15)

    def test_random_scalar_history_against_brute_force(self):
        rng = np.random.default_rng(4)
        u = rng.standard_normal(5)
        w = l1_weights(0.35, 0.3, 4)
        n = 4
        brute = sum(w.b[n - k] * (u[k] - u[k - 1]) for k in range(1, n + 1))
        assert float(l1_apply(u, w)) == pytest.approx(brute, abs=1e-13)
        assert float(l1_apply_direct(u, w)) == pytest.approx(brute, abs=1e-13)

    def test_length_mismatch(self):
        w = l1_weights(0.5, 1.0, 2)
        with pytest.raises(ValueError):
            l1_apply(np.zeros(5), w)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_convergence_order_on_t_squared(self, alpha):
        T = 1.0
        errors = []
        for N in (16, 32, 64, 128, 256):
            t = np.linspace(0, T, N + 1)
            w = l1_weights(alpha, T / N, N)
            errors.append(abs(float(l1_apply(t**2, w)) - caputo_exact_monomial(alpha, 2, T)))
        orders = observed_orders(errors)
        assert abs(orders[-1] - (2 - alpha)) < 0.1


class TestL2Coefficients:
    def test_first_coefficients_alpha_half(self):
        c = l2_coefficients(0.5, 4)
        assert c.a[1] == pytest.approx(-0.6035534, abs=1e-7)
        assert c.b[1] == pytest.approx(0.5857864, abs=1e-7)
        assert c.c[1] == pytest.approx(0.0177670, abs=1e-7)
        assert abs(c.a[1] + c.b[1] + c.c[1]) < 1e-12

    def test_closed_forms_at_j1(self):
        # independent evaluation of the closed forms at j = 1 for alpha = 1/2
        s2 = math.sqrt(2)
        a1 = -1.5 * 1.5 * s2 + 0.75 + 2**1.5 - 1
        b1 = 3 * s2 - 2 * 2**1.5 + 2
        c1 = -0.75 * (s2 + 1) + 2**1.5 - 1
        c = l2_coefficients(0.5, 2)
        assert (c.a[1], c.b[1], c.c[1]) == pytest.approx((a1, b1, c1), rel=1e-14)

    def test_r1(self):
        c = l2_coefficients(0.5, 2)
        assert c.r1 == pytest.approx(2.25 - 1.25 * math.sqrt(2), rel=1e-14)
        assert c.r1 == pytest.approx(0.4822330, abs=1e-7)
        assert c.r1 + c.d[1] == pytest.approx(1.5, rel=1e-14)

    def test_d_definition(self):
        c = l2_coefficients(0.3, 10)
        assert c.d[1] == pytest.approx(c.c[1] + 2 - 0.6, rel=1e-14)
        np.testing.assert_allclose(c.d[2:], c.c[2:] - c.a[1:-1], rtol=1e-13)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_inequalities(self, alpha):
        c = l2_coefficients(alpha, 300)
        assert c.check() == []
        assert np.all(c.a[1:65] < 0)

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            l2_coefficients(0.5, 1)


class TestL2Apply:
    def test_constant_history_gives_zero(self):
        c = l2_coefficients(0.5, 6)
        np.testing.assert_allclose(l2_apply(np.full(7, -0.3), c, 0.1), 0.0, atol=1e-12)

    def test_first_step(self):
        c = l2_coefficients(0.5, 2)
        value = float(l2_apply(np.array([0.0, 1.0]), c, 1.0))
        assert value == pytest.approx(1.5 / gamma(2.5), rel=1e-14)
        assert value == pytest.approx(1.1283792, abs=1e-7)
        # the first-step operator coincides with the L1 formula
        assert value == pytest.approx(1.0 / gamma(1.5), rel=1e-14)

    def test_reformulation_matches_three_term_form(self):
        rng = np.random.default_rng(11)
        for alpha in (0.2, 0.5, 0.9):
            c = l2_coefficients(alpha, 8)
            for n in range(1, 6):
                u = rng.standard_normal(n + 1)
                ref = float(l2_apply_direct(u, c, 0.25))
                assert float(l2_apply(u, c, 0.25)) == pytest.approx(ref, rel=1e-11, abs=1e-13)

    def test_insufficient_history(self):
        c = l2_coefficients(0.5, 4)
        with pytest.raises(ValueError):
            l2_apply(np.zeros(3), c, 0.1, n=3)
        with pytest.raises(ValueError):
            l2_apply(np.zeros(7), c, 0.1)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_convergence_order_on_t_cubed(self, alpha):
        # L2 reproduces quadratics exactly, so a cubic exposes its order
        T = 1.0
        errors = []
        for N in (16, 32, 64, 128, 256):
            t = np.linspace(0, T, N + 1)
            c = l2_coefficients(alpha, N)
            errors.append(abs(float(l2_apply(t**3, c, T / N)) - caputo_exact_monomial(alpha, 3, T)))
        orders = observed_orders(errors)
        assert np.all(np.diff(errors) < 0)
        assert abs(orders[-1] - (3 - alpha)) < 0.15

    def test_exact_on_quadratics(self):
        T, N = 1.0, 20
        t = np.linspace(0, T, N + 1)
        c = l2_coefficients(0.4, N)
        assert float(l2_apply(t**2, c, T / N)) == pytest.approx(caputo_exact_monomial(0.4, 2, T),
                                                                rel=1e-11)


class TestCaputoMonomial:
    def test_examples(self):
        assert caputo_exact_monomial(0.5, 2, 1.0) == pytest.approx(1.5045055, abs=1e-7)
        assert caputo_exact_monomial(0.3, 1, 1.0) == pytest.approx(1 / gamma(1.7), rel=1e-15)
        assert caputo_exact_monomial(0.5, 2, 0.0) == 0.0

    def test_rejects_bad_degree(self):
        with pytest.raises(ValueError):
            caputo_exact_monomial(0.5, 0, 1.0)


class TestSolveHistory:
    def test_growth_and_indexing(self):
        hist = SolveHistory(np.zeros((2, 2)), 0.1, capacity=1)
        for k in range(1, 10):
            hist.append(np.full((2, 2), float(k)))
        assert len(hist) == 10 and hist.n == 9
        assert hist[-1][0, 0] == 9.0 and hist[3][1, 1] == 3.0
        assert hist.u0[0, 0] == 0.0
        with pytest.raises(IndexError):
            hist[10]

    def test_fields_view_is_read_only(self):
        hist = SolveHistory.from_sequence([np.zeros(3), np.ones(3)], 0.5)
        with pytest.raises(ValueError):
            hist.fields[0, 0] = 1.0

    def test_shape_mismatch(self):
        hist = SolveHistory(np.zeros(3), 0.5)
        with pytest.raises(ValueError):
            hist.append(np.zeros(4))

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            SolveHistory(np.zeros(3), 0.0)

    def test_pair_norms_agree_with_recomputation(self):
        rng = np.random.default_rng(0)
        fields = rng.standard_normal((7, 4, 4))
        hist = SolveHistory.from_sequence(fields, 0.1)
        for n in (6, 3, 6):
            got = hist.pair_sq_norms(n)
            want = np.array([np.sum((fields[n] - fields[k]) ** 2) for k in range(n)])
            np.testing.assert_allclose(got, want, rtol=1e-12)
