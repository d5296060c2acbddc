import math
import time

import numpy as np
import pytest
from scipy.special import erfcx, gamma

from tfphase.mittag import (
    ConvergenceFailure,
    MLQuery,
    linear_reference,
    ml,
    ml_derivative_check,
    mittag_leffler,
)


class TestClosedForms:
    def test_examples(self):
        assert mittag_leffler(-1.0, 1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-12)
        assert mittag_leffler(0.0, 0.5, 1.0) == 1.0
        assert mittag_leffler(0.0, 0.5, 0.5) == pytest.approx(1 / gamma(0.5), rel=1e-15)
        assert mittag_leffler(-1.0, 0.5, 1.0) == pytest.approx(math.e * math.erfc(1.0), rel=1e-10)
        assert mittag_leffler(-1.0, 0.5, 1.0) == pytest.approx(0.4275836, abs=1e-7)

    @pytest.mark.parametrize("x", [1e-3, 0.1, 0.7, 2.0, 5.0, 12.0, 30.0, 100.0, 1e3, 1e5])
    def test_alpha_half_is_scaled_erfc(self, x):
        assert mittag_leffler(-x, 0.5, 1.0) == pytest.approx(erfcx(x), rel=1e-12)

    @pytest.mark.parametrize("x", [-30.0, -5.0, -0.3, 0.4, 3.0, 20.0])
    def test_alpha_one_is_exponential(self, x):
        assert mittag_leffler(x, 1.0, 1.0) == pytest.approx(math.exp(x), rel=1e-12)
        assert mittag_leffler(x, 1.0, 2.0) == pytest.approx(math.expm1(x) / x, rel=1e-12)

    @pytest.mark.parametrize("x", [0.5, 2.0, 6.0])
    def test_alpha_two_is_cosine(self, x):
        assert mittag_leffler(-x * x, 2.0, 1.0) == pytest.approx(math.cos(x), abs=1e-12)

    def test_array_input(self):
        z = np.array([[-1.0, 0.0], [-4.0, 0.5]])
        out = mittag_leffler(z, 1.0)
        np.testing.assert_allclose(out, np.exp(z), rtol=1e-12)


class TestQualitative:
    @pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.8, 0.99])
    def test_bounded_and_decaying_on_negative_axis(self, alpha):
        x = np.geomspace(1e-4, 1e6, 60)
        vals = np.array([mittag_leffler(-v, alpha) for v in x])
        assert np.all(vals > 0) and np.all(vals <= 1)
        assert np.all(np.diff(vals) < 0)

    def test_algebraic_tail(self):
        # E_{a,1}(-x) ~ 1 / (x Gamma(1 - a)) for large x
        a, x = 0.4, 1e6
        assert mittag_leffler(-x, a) == pytest.approx(1 / (x * gamma(1 - a)), rel=1e-5)

    def test_fast(self):
        t0 = time.perf_counter()
        for a in (0.2, 0.5, 0.9):
            for x in np.geomspace(1e-2, 1e4, 20):
                mittag_leffler(-x, a)
        assert time.perf_counter() - t0 < 5


class TestDerivativeIdentities:
    @pytest.mark.parametrize("alpha, lam, t", [(0.3, 1.0, 0.7), (0.5, 2.0, 1.0), (0.8, 4.0, 1.5)])
    def test_second_order_in_h(self, alpha, lam, t):
        errs_r, errs_k = [], []
        for h in (0.04, 0.02, 0.01):
            c = ml_derivative_check(alpha, lam, t, h)
            errs_r.append(abs(c.fd_relaxation - c.closed_relaxation))
            errs_k.append(abs(c.fd_kernel - c.closed_kernel))
        for errs in (errs_r, errs_k):
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            assert np.all(np.abs(orders - 2) < 0.2)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            ml_derivative_check(0.5, 1.0, 0.1, 0.2)


class TestLinearReference:
    def test_examples(self):
        assert linear_reference(0.5, [(1.0, 2.0)], 1.0, 1.0, 0.0) == [2.0]
        (c,) = linear_reference(1 - 1e-12, [(4.0, 1.0)], 0.5, 0.5, 2.0)
        assert c == pytest.approx(math.exp(-2.0), rel=1e-8)
        out = linear_reference(0.5, [(1.0, 1.0), (4.0, 1j)], 1.0, 1.0, 1.0)
        assert out[0] == pytest.approx(math.e * math.erfc(1.0), rel=1e-10)
        assert out[1] == pytest.approx(1j * erfcx(4.0), rel=1e-10)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            linear_reference(0.5, [(1.0, 1.0)], 1.0, 1.0, -1.0)


class TestFailures:
    def test_large_positive_argument(self):
        with pytest.raises(ConvergenceFailure):
            mittag_leffler(1e6, 0.5)

    @pytest.mark.parametrize("kwargs", [dict(alpha=0.0), dict(alpha=-1.0), dict(tol=1e-16)])
    def test_query_validation(self, kwargs):
        q = dict(alpha=0.5, beta=1.0, z=-1.0)
        q.update(kwargs)
        with pytest.raises(ValueError):
            MLQuery(**q)

    def test_query_evaluation(self):
        assert ml(MLQuery(1.0, 1.0, -2.0)) == pytest.approx(math.exp(-2), rel=1e-12)
