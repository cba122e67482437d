import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from sembcd.bcd import FitConfig
from sembcd.graph import MixedGraph
from sembcd.inference import NestingError, chi2_upper_tail, lrt, subsample_lrt
from sembcd.likelihood import Dataset, Params, saturated_loglik
from sembcd.simulate import sample_data

CHAIN = MixedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)], [(0, 3)])
CHAIN_PLUS = CHAIN.with_edges(directed=[(0, 2)])


def chain_data(rng, N=300):
    B = np.zeros((4, 4))
    B[1, 0], B[2, 1], B[3, 2] = 0.8, -0.6, 0.7
    Om = np.eye(4)
    Om[0, 3] = Om[3, 0] = 0.3
    return sample_data(Params(B, Om), N, rng)


class TestChi2:
    def test_zero(self):
        assert chi2_upper_tail(0.0, 1) == 1.0

    def test_critical_value(self):
        assert chi2_upper_tail(3.8415, 1) == pytest.approx(0.05, abs=1e-3)

    def test_small_stat(self):
        assert chi2_upper_tail(0.075, 1) == pytest.approx(0.784, abs=2e-3)

    def test_median(self):
        assert chi2_upper_tail(0.45493642311957, 1) == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("x,df", [(0.3, 1), (2.0, 1), (5.0, 3), (1.0, 4)])
    def test_numerical_integration(self, x, df):
        from math import gamma

        def dens(t):
            return t ** (df / 2 - 1) * np.exp(-t / 2) / (2 ** (df / 2) * gamma(df / 2))

        tail, _ = integrate.quad(dens, x, np.inf, epsabs=1e-13)
        assert chi2_upper_tail(x, df) == pytest.approx(tail, abs=1e-10)

    def test_errors(self):
        with pytest.raises(ValueError):
            chi2_upper_tail(-1.0, 1)
        with pytest.raises(ValueError):
            chi2_upper_tail(1.0, 0)

    @given(st.floats(0, 50), st.floats(0, 50))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert chi2_upper_tail(lo, 1) >= chi2_upper_tail(hi, 1)


class TestLrt:
    def test_identical_graphs(self, rng):
        res = lrt(CHAIN, CHAIN, chain_data(rng))
        assert res.stat == pytest.approx(0.0, abs=1e-8)
        assert res.df == 0 and res.p_chi2 == 1.0

    def test_nested_nonnegative(self, rng):
        for _ in range(5):
            res = lrt(CHAIN, CHAIN_PLUS, chain_data(rng))
            assert res.stat >= -1e-8
            assert res.df == 1

    def test_not_nested(self, rng):
        with pytest.raises(NestingError):
            lrt(CHAIN_PLUS, CHAIN, chain_data(rng))

    def test_saturated_alternative(self, rng):
        d = chain_data(rng)
        full = MixedGraph.from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
        null = MixedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        res = lrt(null, full, d)
        assert res.fit_alt.loglik == pytest.approx(saturated_loglik(d), abs=1e-8)
        assert res.stat == pytest.approx(d.N * (saturated_loglik(d) - res.fit_null.loglik), abs=1e-6)
        assert res.df == 3

    def test_detects_missing_edge(self, rng):
        B = np.zeros((4, 4))
        B[1, 0], B[2, 1], B[3, 2], B[2, 0] = 0.8, -0.6, 0.7, 0.5
        Om = np.eye(4)
        Om[0, 3] = Om[3, 0] = 0.3
        d = sample_data(Params(B, Om), 500, rng)
        assert lrt(CHAIN, CHAIN_PLUS, d).p_chi2 < 1e-6


class TestSubsample:
    def test_shape_and_range(self, rng):
        d = chain_data(rng, 200)
        res = subsample_lrt(CHAIN, CHAIN_PLUS, d, b=50, n_sub=20, rng=1)
        assert res.stats.size + res.n_failed == 20
        assert 0.0 <= res.empirical_p <= 1.0
        assert not res.scaled

    def test_scaled(self, rng):
        d = chain_data(rng, 200)
        raw = subsample_lrt(CHAIN, CHAIN_PLUS, d, b=50, n_sub=10, rng=1)
        scaled = subsample_lrt(CHAIN, CHAIN_PLUS, d, b=50, n_sub=10, rng=1, scale_stat=True)
        np.testing.assert_allclose(raw.stats, scaled.stats)
        assert scaled.scaled
        frac = np.mean(raw.stats * 4 >= raw.full_stat)
        assert scaled.empirical_p == pytest.approx(frac)

    def test_full_sample(self, rng):
        d = chain_data(rng, 100)
        res = subsample_lrt(CHAIN, CHAIN_PLUS, d, b=100, n_sub=3, rng=0)
        np.testing.assert_allclose(res.stats, res.full_stat, atol=1e-6)

    def test_paper_protocol_shape_accepted(self, rng):
        d = chain_data(rng, 100)
        res = subsample_lrt(CHAIN, CHAIN_PLUS, d, b=30, n_sub=5, rng=0)
        assert res.b == 30

    def test_column_order_irrelevant(self, rng):
        d = chain_data(rng, 60)
        cols = rng.choice(60, 30, replace=False)
        a = lrt(CHAIN, CHAIN_PLUS, d.subset(np.sort(cols))).stat
        b = lrt(CHAIN, CHAIN_PLUS, d.subset(cols)).stat
        assert a == pytest.approx(b, abs=1e-7)

    def test_errors(self, rng):
        d = chain_data(rng, 50)
        with pytest.raises(ValueError):
            subsample_lrt(CHAIN, CHAIN_PLUS, d, b=30, n_sub=0)
        with pytest.raises(ValueError):
            subsample_lrt(CHAIN, CHAIN_PLUS, d, b=60, n_sub=2)
        with pytest.raises(NestingError):
            subsample_lrt(CHAIN_PLUS, CHAIN, d, b=30, n_sub=2)
