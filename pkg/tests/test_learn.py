"""Moment-matching estimation: individual estimators, diagnostics, trends."""

import numpy as np
import pytest

from plg import model
from plg.learn import (TraceSet, ce_learn, estimate_initial, estimate_noise,
                       estimate_trend)

from _util import random_plg


def _corpus(params, trace_len, num_traces, seed):
    return model.sample_traces(params, trace_len, num_traces,
                               np.random.default_rng(seed))


class TestTraceSet:
    def test_rejects_single_trace(self):
        with pytest.raises(ValueError):
            TraceSet(np.zeros((1, 8)), 2)

    def test_rejects_short_traces(self):
        with pytest.raises(ValueError):
            TraceSet(np.zeros((4, 3)), 2)


class TestEstimateInitial:
    def test_identical_traces_have_zero_dispersion(self):
        traces = np.tile([1.0, 2.0, 3.0, 4.0], (5, 1))
        mu0, sigma0 = estimate_initial(TraceSet(traces, 2))
        assert np.array_equal(mu0, [1.0, 2.0])
        assert np.array_equal(sigma0, np.zeros((2, 2)))

    def test_two_traces_scalar(self):
        mu0, sigma0 = estimate_initial(
            TraceSet(np.array([[0.0, 9.0], [2.0, 9.0]]), 1))
        assert mu0[0] == 1.0 and sigma0[0, 0] == 2.0

    def test_matches_two_pass_oracle(self):
        truth = random_plg(3, 41)
        ts = TraceSet(_corpus(truth, 8, 500, 1), 3)
        mu0, sigma0 = estimate_initial(ts)
        first = ts.traces[:, :3]
        ref_mu = np.array([first[:, i].sum() / 500 for i in range(3)])
        ref_cov = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                ref_cov[i, j] = np.sum((first[:, i] - ref_mu[i])
                                       * (first[:, j] - ref_mu[j])) / 499
        np.testing.assert_allclose(mu0, ref_mu, rtol=1e-12)
        np.testing.assert_allclose(sigma0, ref_cov, rtol=1e-12, atol=1e-15)

    def test_unbiased_for_known_model(self):
        truth = random_plg(2, 43)
        traces = _corpus(truth, 4, 100_000, 2)[:, :2]
        k = traces.shape[0]
        mu0, sigma0 = estimate_initial(TraceSet(
            np.hstack([traces, traces]), 2))
        se_mean = np.sqrt(np.diag(truth.Sigma0) / k)
        assert np.all(np.abs(mu0 - truth.mu0) <= 5 * se_mean)
        d = np.diag(truth.Sigma0)
        se_cov = np.sqrt((np.outer(d, d) + truth.Sigma0 ** 2) / k)
        assert np.all(np.abs(sigma0 - truth.Sigma0) <= 5 * se_cov)


class TestEstimateTrend:
    def test_exact_on_noiseless_recursion(self):
        # start vector chosen off the recursion's eigenvectors so both modes
        # are present and the trend is uniquely determined
        g = np.array([-0.3, 1.1])
        ys = [1.0, 0.8]
        while len(ys) < 12:
            ys.append(g[0] * ys[-2] + g[1] * ys[-1])
        fit = estimate_trend(TraceSet(np.tile(ys, (3, 1)), 2))
        assert fit.umt_ok
        np.testing.assert_allclose(fit.g, g, atol=1e-10)

    def test_geometric_means(self):
        traces = np.tile([1.0, 0.5, 0.25, 0.125], (2, 1))
        fit = estimate_trend(TraceSet(traces, 1))
        np.testing.assert_allclose(fit.g, [0.5], atol=1e-13)
        assert fit.umt_ok and fit.gamma_condition >= 1.0

    def test_zero_means_flag_non_unique_trend(self):
        traces = np.array([[1.0, -2.0, 0.5, 3.0]] * 2)
        traces = np.vstack([traces, -traces])
        fit = estimate_trend(TraceSet(traces, 2))
        assert not fit.umt_ok
        assert np.array_equal(fit.g, [0.0, 0.0])
        assert fit.gamma_condition == np.inf

    def test_normal_equations_residual_orthogonality(self):
        from numpy.lib.stride_tricks import sliding_window_view
        for seed in range(20):
            truth = random_plg(2, 60 + seed)
            ts = TraceSet(_corpus(truth, 12, 200, seed), 2)
            fit = estimate_trend(ts)
            ybar = ts.traces.mean(axis=0)
            gamma = sliding_window_view(ybar, 2)[:10]
            lam = ybar[2:]
            resid = gamma.T @ (gamma @ fit.g - lam)
            scale = 1.0 + float(np.max(np.abs(gamma.T @ lam)))
            assert np.all(np.abs(resid) <= 1e-8 * scale)


class TestEstimateNoise:
    def test_noiseless_residuals_vanish(self):
        g = np.array([-0.3, 1.1])
        ys = [1.0, 0.8]
        while len(ys) < 12:
            ys.append(g[0] * ys[-2] + g[1] * ys[-1])
        ts = TraceSet(np.tile(ys, (3, 1)), 2)
        c_hat, sigma2 = estimate_noise(ts, g)
        np.testing.assert_allclose(c_hat, [0.0, 0.0], atol=1e-12)
        assert sigma2 <= 1e-24

    def test_hand_computed_index_convention(self):
        # pins the time-index pairing of residuals with observations: with
        # traces (1,2,3) twice and unit trend, both residuals are 1 and the
        # denominator is K(N-n)-1 = 3
        ts = TraceSet(np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]), 1)
        c_hat, sigma2 = estimate_noise(ts, np.array([1.0]))
        np.testing.assert_allclose(sigma2, 4.0 / 3.0, rtol=1e-15)
        np.testing.assert_allclose(c_hat, [2.0], rtol=1e-15)

    def test_sigma2_never_negative(self):
        rng = np.random.default_rng(71)
        for _ in range(20):
            traces = rng.standard_normal((5, 8))
            _, sigma2 = estimate_noise(TraceSet(traces, 2),
                                       rng.standard_normal(2))
            assert sigma2 >= 0.0

    def test_estimates_tighten_with_more_traces(self):
        # median absolute error over 20 seeds decreases along the corpus-size
        # grid for both noise parameters
        truth = random_plg(1, 73)
        gaps_c, gaps_s = [], []
        for k in (100, 1000, 10_000):
            gc, gs = [], []
            for seed in range(20):
                ts = TraceSet(_corpus(truth, 6, k, 1000 + seed), 1)
                fit = estimate_trend(ts)
                c_hat, s_hat = estimate_noise(ts, fit.g)
                gc.append(abs(c_hat[0] - truth.C[0]))
                gs.append(abs(s_hat - truth.sigma2))
            gaps_c.append(np.median(gc))
            gaps_s.append(np.median(gs))
        assert gaps_c[0] > gaps_c[1] > gaps_c[2]
        assert gaps_s[0] > gaps_s[1] > gaps_s[2]


class TestNegationInvariance:
    def test_estimators_even_under_joint_sign_flip(self):
        truth = random_plg(2, 79)
        traces = _corpus(truth, 10, 300, 3)
        ts, neg = TraceSet(traces, 2), TraceSet(-traces, 2)
        fit, fit_neg = estimate_trend(ts), estimate_trend(neg)
        np.testing.assert_allclose(fit.g, fit_neg.g, rtol=1e-12, atol=1e-14)
        c1, s1 = estimate_noise(ts, fit.g)
        c2, s2 = estimate_noise(neg, fit_neg.g)
        np.testing.assert_allclose(c1, c2, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(s1, s2, rtol=1e-12)


class TestCeLearn:
    def test_composition_and_diagnostics(self):
        truth = random_plg(2, 83)
        ts = TraceSet(_corpus(truth, 12, 2000, 4), 2)
        params, diag = ce_learn(ts)
        mu0, sigma0 = estimate_initial(ts)
        assert np.array_equal(params.mu0, mu0)
        assert np.array_equal(params.Sigma0, sigma0)
        assert diag.umt_ok and not diag.psd_violation
        assert diag.gamma_condition >= 1.0

    def test_zero_dispersion_corpus_flags_violation(self):
        ts = TraceSet(np.tile([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], (4, 1)), 2)
        params, diag = ce_learn(ts)
        assert np.array_equal(params.Sigma0, np.zeros((2, 2)))
        assert diag.psd_violation

    def test_clip_flag_keeps_estimates_psd(self):
        truth = random_plg(2, 89)
        ts = TraceSet(_corpus(truth, 8, 50, 5), 2)
        params, _ = ce_learn(ts, clip_sigma0=True)
        assert np.linalg.eigvalsh(params.Sigma0)[0] >= -1e-12

    def test_likelihood_error_shrinks_with_corpus(self):
        # median per-trace log-likelihood error over 10 seeds, small corpus
        # versus large
        gaps = {100: [], 10_000: []}
        for seed in range(10):
            truth = random_plg(2, 200 + seed)
            corpus = _corpus(truth, 20, 10_000, seed)
            for k in gaps:
                subset = corpus[:k]
                learned, _ = ce_learn(TraceSet(subset, 2))
                l_learned = float(np.sum(model.loglik_batch(learned, subset)))
                l_true = float(np.sum(model.loglik_batch(truth, subset)))
                gaps[k].append(abs(l_learned - l_true) / k)
        assert np.median(gaps[10_000]) < np.median(gaps[100])
