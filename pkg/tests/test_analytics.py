import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from wetbeam.analytics import (GammaParams, aa_baseline, beta_eq, gamma_pdf, ks_distance, link_budget,
                               precoding_gain_db, projection_power, sa_baseline, second_order_approx)
from wetbeam.config import dbm_to_watts, watts_to_dbm

BEQ = 10 ** -8.35

positive = st.floats(0.05, 50.0, allow_nan=False)


class TestGammaParams:
    def test_moments(self):
        p = GammaParams(3.0, 2.0)
        assert p.mean == 6.0 and p.variance == 12.0 and p.second_moment == 48.0

    @pytest.mark.parametrize("k,t", [(0, 1), (1, 0), (-1, 1), (1, -2)])
    def test_rejects_nonpositive(self, k, t):
        with pytest.raises(ValueError):
            GammaParams(k, t)

    def test_cdf_matches_scipy(self):
        p = GammaParams(2.5, 0.3)
        xs = np.linspace(0, 3, 7)
        np.testing.assert_allclose(p.cdf(xs), stats.gamma.cdf(xs, 2.5, scale=0.3))


class TestGammaPdf:
    def test_exponential_at_zero(self):
        assert gamma_pdf(0.0, GammaParams(1, 1)) == pytest.approx(1.0)

    def test_exponential_at_one(self):
        assert gamma_pdf(1.0, GammaParams(1, 1)) == pytest.approx(math.exp(-1), rel=1e-14)

    def test_negative_support_is_zero(self):
        assert gamma_pdf(-1.0, GammaParams(2, 1)) == 0.0

    @given(positive, positive, st.floats(0.01, 100.0))
    def test_matches_scipy(self, k, t, x):
        assert gamma_pdf(x, GammaParams(k, t)) == pytest.approx(stats.gamma.pdf(x, k, scale=t), rel=1e-9,
                                                                abs=1e-300)

    def test_normalized_by_quadrature(self):
        p = GammaParams(24, BEQ)
        total, _ = integrate.quad(lambda x: gamma_pdf(x, p), 0, 50 * p.mean, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_large_shape_no_overflow(self):
        p = GammaParams(1e4, 1e-3)
        v = gamma_pdf(p.mean, p)
        assert np.isfinite(v) and v > 0
        assert v == pytest.approx(stats.gamma.pdf(p.mean, 1e4, scale=1e-3), rel=1e-8)

    @given(st.floats(0.1, 10), positive, positive)
    @settings(max_examples=50)
    def test_scaling_change_of_variables(self, a, k, t):
        xs = np.array([0.1, 0.7, 1.3, 4.0, 9.0])
        lhs = gamma_pdf(xs, GammaParams(k, a * t))
        rhs = gamma_pdf(xs / a, GammaParams(k, t)) / a
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-300)


class TestBetaEq:
    def test_unit(self):
        assert beta_eq(1, 1, 1) == 1

    def test_operating_point(self):
        assert beta_eq(10 ** -6.35, 10, 10) == pytest.approx(BEQ, rel=1e-12)

    def test_doubling_power_halves(self):
        assert beta_eq(1e-6, 20, 10) == pytest.approx(beta_eq(1e-6, 10, 10) / 2, rel=1e-14)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            beta_eq(0, 1, 1)


class TestSecondOrder:
    def test_identical_terms(self):
        y = second_order_approx([GammaParams(8, BEQ)] * 3)
        assert y.shape == pytest.approx(24) and y.scale == pytest.approx(BEQ, rel=1e-12)

    def test_single_term_unchanged(self):
        p = GammaParams(3.3, 0.7)
        y = second_order_approx([p])
        assert y.shape == pytest.approx(3.3, rel=1e-14) and y.scale == pytest.approx(0.7, rel=1e-14)

    def test_closed_form_pair(self):
        y = second_order_approx([GammaParams(1, 1), GammaParams(1, 2)])
        assert y.shape == pytest.approx(1.8, rel=1e-14) and y.scale == pytest.approx(5 / 3, rel=1e-14)

    def test_empty(self):
        with pytest.raises(ValueError):
            second_order_approx([])

    @given(st.lists(st.tuples(positive, positive), min_size=1, max_size=10))
    def test_preserves_mean_and_variance(self, pairs):
        terms = [GammaParams(k, t) for k, t in pairs]
        y = second_order_approx(terms)
        assert y.mean == pytest.approx(sum(t.mean for t in terms), rel=1e-12)
        assert y.variance == pytest.approx(sum(t.variance for t in terms), rel=1e-12)

    def test_sum_of_exponentials_empirical(self):
        # N exponential(1) samples summed are Gamma(N, 1); 3/sqrt(trials) envelope
        rng = np.random.default_rng(3)
        trials, n = 10_000, 6
        s = rng.exponential(1.0, (trials, n)).sum(axis=1)
        y = second_order_approx([GammaParams(1, 1)] * n)
        assert abs(s.mean() - y.mean) / y.mean <= 3 / math.sqrt(trials)
        assert abs(s.var(ddof=1) - y.variance) / y.variance <= 3 * math.sqrt(2 + 6 / n) / math.sqrt(trials)


class TestBaselines:
    def test_aa_operating_point(self):
        p = aa_baseline(8, 3, BEQ)
        assert p.shape == pytest.approx(24) and p.scale == pytest.approx(BEQ, rel=1e-12)

    def test_aa_single_terminal_is_exponential(self):
        p = aa_baseline(1, 1, BEQ)
        assert p.shape == pytest.approx(1) and p.scale == pytest.approx(BEQ)

    @given(st.integers(1, 64), st.integers(1, 16), st.integers(1, 8), positive)
    def test_sa_same_mean_smaller_variance(self, M, K, L, b):
        aa, sa = aa_baseline(K, L, b), sa_baseline(M, K, L, b)
        assert sa.shape == pytest.approx(M * K * L) and sa.scale == pytest.approx(b / M)
        assert sa.mean == pytest.approx(aa.mean, rel=1e-12)
        assert sa.variance == pytest.approx(aa.variance / M, rel=1e-12)

    def test_cn_power_is_exponential(self):
        rng = np.random.default_rng(5)
        y = (rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000)) / math.sqrt(2)
        assert ks_distance(np.abs(y) ** 2, GammaParams(1, 1)) <= 0.02


class TestProjection:
    def test_full_projection_identity(self):
        base = GammaParams(24, BEQ)
        p, m2 = projection_power(8, 8, base)
        assert p == base and m2 == pytest.approx(base.second_moment)

    def test_half_projection_halves_mean(self):
        base = GammaParams(24, 2.0)
        p, m2 = projection_power(4, 8, base)
        assert p.mean == pytest.approx(base.mean / 2)
        assert m2 == pytest.approx(12 * 4 + 24**2)

    @pytest.mark.parametrize("c", [0, 9])
    def test_out_of_range(self, c):
        with pytest.raises(ValueError):
            projection_power(c, 8, GammaParams(1, 1))

    def test_two_terminal_partial_sum_monte_carlo(self):
        # 24 i.i.d. exponential terminals with scale beq; two of eight per cluster
        rng = np.random.default_rng(11)
        x = rng.exponential(BEQ, (10_000, 3, 8))
        partial = x[:, :, :2].sum(axis=(1, 2))
        p, _ = projection_power(2, 8, GammaParams(24, BEQ))
        assert abs(partial.mean() - p.mean) / p.mean <= 0.03


class TestLinkBudget:
    def test_operating_point(self):
        pr = link_budget(40, 10, 19.57, -63.5)
        assert pr == pytest.approx(6.07, abs=1e-12)
        assert dbm_to_watts(pr) == pytest.approx(4.05e-3, rel=0.01)

    def test_trivial(self):
        assert link_budget(40, 0, 0, 0) == 40

    def test_inverse(self):
        assert precoding_gain_db(6.07, 40, 10, -63.5) == pytest.approx(19.57, abs=1e-12)

    @given(st.floats(-80, 80))
    def test_dbm_round_trip(self, dbm):
        assert watts_to_dbm(dbm_to_watts(dbm)) == pytest.approx(dbm, rel=1e-12, abs=1e-12)
