"""Tests for the distribution families.

Expected log-densities were computed independently with scipy.stats
(poisson.logpmf, multivariate_normal.logpdf) and plain math.log, then frozen
here as literals.
"""

import numpy as np
import pytest

from raregraph.errors import DomainError, FitError, ParameterError
from raregraph.families import (
    BernoulliParam,
    CategoricalParam,
    GaussianParam,
    PoissonParam,
    fit_mle,
    log_density,
    sample,
)


class TestBernoulli:
    def test_log_density_matches_log_p(self):
        b = BernoulliParam(0.3812)
        np.testing.assert_allclose(b.log_density(1), -0.96443110720209, rtol=1e-12)
        np.testing.assert_allclose(b.log_density(0), -0.47997316028322595, rtol=1e-12)

    def test_vectorized(self):
        b = BernoulliParam(0.25)
        out = b.log_density(np.array([0, 1, 1, 0]))
        np.testing.assert_allclose(out, [np.log(0.75), np.log(0.25), np.log(0.25), np.log(0.75)])

    def test_degenerate_edges_give_minus_inf(self):
        assert BernoulliParam(0.0).log_density(1) == -np.inf
        assert BernoulliParam(1.0).log_density(0) == -np.inf
        assert BernoulliParam(1.0).log_density(1) == 0.0

    def test_fit_is_sample_mean(self):
        obs = [1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0]  # 4 of 12
        assert BernoulliParam.fit(obs).p == pytest.approx(4 / 12)

    def test_fit_smoothing(self):
        obs = [1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0]
        assert BernoulliParam.fit(obs, smoothing=1.0).p == pytest.approx(5 / 14)
        # All-zero data stays off the boundary once smoothed.
        assert 0.0 < BernoulliParam.fit([0, 0, 0], smoothing=1.0).p < 0.5

    def test_rejects_bad_values(self):
        with pytest.raises(ParameterError):
            BernoulliParam(1.2)
        with pytest.raises(DomainError):
            BernoulliParam(0.5).log_density(2)
        with pytest.raises(FitError):
            BernoulliParam.fit([])

    def test_sample_frequency(self):
        rng = np.random.default_rng(7)
        draws = BernoulliParam(0.3812).sample(rng, size=200_000)
        assert abs(draws.mean() - 0.3812) < 0.01


class TestCategorical:
    def test_log_density(self):
        c = CategoricalParam([0.394, 0.223, 0.217, 0.166])
        np.testing.assert_allclose(c.log_density(2), -1.5278579254416775, rtol=1e-12)
        out = c.log_density(np.array([0, 3]))
        np.testing.assert_allclose(out, [np.log(0.394), np.log(0.166)])

    def test_simplex_enforced(self):
        with pytest.raises(ParameterError):
            CategoricalParam([0.316, 0.303, 0.194, 0.186])  # sums to 0.999
        with pytest.raises(ParameterError):
            CategoricalParam([0.5, -0.1, 0.6])

    def test_fit_counts(self):
        got = CategoricalParam.fit([0, 0, 1, 2, 0], num_categories=3)
        np.testing.assert_allclose(got.probs, [3 / 5, 1 / 5, 1 / 5])

    def test_fit_smoothing_covers_unseen(self):
        got = CategoricalParam.fit([0, 0, 1], num_categories=4, smoothing=1.0)
        np.testing.assert_allclose(got.probs, [3 / 7, 2 / 7, 1 / 7, 1 / 7])
        assert got.probs.sum() == pytest.approx(1.0, abs=1e-15)

    def test_out_of_range(self):
        c = CategoricalParam([0.5, 0.5])
        with pytest.raises(DomainError):
            c.log_density(2)
        with pytest.raises(DomainError):
            CategoricalParam.fit([0, 5], num_categories=3)

    def test_sample_distribution(self):
        rng = np.random.default_rng(11)
        c = CategoricalParam([0.394, 0.223, 0.217, 0.166])
        draws = c.sample(rng, size=200_000)
        freq = np.bincount(draws, minlength=4) / draws.size
        np.testing.assert_allclose(freq, c.probs, atol=0.01)


class TestPoisson:
    def test_log_density_frozen_values(self):
        np.testing.assert_allclose(PoissonParam(2.0).log_density(0), -2.0, rtol=1e-12)
        np.testing.assert_allclose(
            PoissonParam(20.1514).log_density(20), -2.4215411630068253, rtol=1e-12
        )
        np.testing.assert_allclose(
            PoissonParam(29.0939).log_density(35), -3.261577046317523, rtol=1e-12
        )

    def test_mass_sums_to_one(self):
        p = PoissonParam(4.9)
        ks = np.arange(0, 200)
        total = np.exp(p.log_density(ks)).sum()
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_fit_is_mean_with_floor(self):
        assert PoissonParam.fit([3, 5, 1, 7]).rate == pytest.approx(4.0)
        assert PoissonParam.fit([0, 0, 0]).rate == pytest.approx(1e-6)

    def test_rejects_negative_and_fractional(self):
        with pytest.raises(DomainError):
            PoissonParam(2.0).log_density(-1)
        with pytest.raises(DomainError):
            PoissonParam.fit([1.5])
        with pytest.raises(ParameterError):
            PoissonParam(0.0)

    def test_sample_mean(self):
        rng = np.random.default_rng(3)
        draws = PoissonParam(20.1514).sample(rng, size=100_000)
        assert abs(draws.mean() / 20.1514 - 1.0) < 0.02


class TestGaussian:
    def test_standard_normal_at_origin(self):
        g = GaussianParam(np.zeros(2), np.eye(2))
        np.testing.assert_allclose(g.log_density(np.zeros(2)), -1.8378770664093453, rtol=1e-12)

    def test_correlated_case(self):
        g = GaussianParam([0.5, -1.0], [[2.0, 0.3], [0.3, 1.0]])
        np.testing.assert_allclose(g.log_density([1.0, 0.0]), -2.6718998916270964, rtol=1e-12)

    def test_batched_rows(self):
        g = GaussianParam([0.5, -1.0], [[2.0, 0.3], [0.3, 1.0]])
        rows = np.array([[1.0, 0.0], [0.5, -1.0]])
        out = g.log_density(rows)
        assert out.shape == (2,)
        np.testing.assert_allclose(out[0], g.log_density(rows[0]), rtol=1e-12)

    def test_rejects_non_pd(self):
        with pytest.raises(ParameterError):
            GaussianParam([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ParameterError):
            GaussianParam([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]])  # asymmetric

    def test_fit_recovers_moments(self):
        rng = np.random.default_rng(5)
        mean = np.array([0.5, -1.0, 2.0])
        cov = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.5]])
        draws = GaussianParam(mean, cov).sample(rng, size=200_000)
        fitted = GaussianParam.fit(draws)
        np.testing.assert_allclose(fitted.mean, mean, atol=0.02)
        np.testing.assert_allclose(fitted.cov, cov, atol=0.05)

    def test_fit_too_few_samples(self):
        with pytest.raises(FitError, match="pooled"):
            GaussianParam.fit(np.zeros((3, 4)))

    def test_fit_regularizes_singular_sample_cov(self):
        # Identical rows give a rank-0 covariance; fit must still return a PD param.
        obs = np.tile([1.0, 2.0], (10, 1))
        fitted = GaussianParam.fit(obs)
        assert np.all(np.diag(fitted.cov) > 0)
        assert np.isfinite(fitted.log_density([1.0, 2.0]))


class TestDispatch:
    def test_round_trip_all_families(self):
        rng = np.random.default_rng(0)
        cases = [
            ("bernoulli", BernoulliParam(0.3), 1),
            ("categorical", CategoricalParam([0.2, 0.8]), 0),
            ("poisson", PoissonParam(4.9), 3),
            ("gaussian", GaussianParam(np.zeros(2), np.eye(2)), np.zeros(2)),
        ]
        for family, params, value in cases:
            ld = log_density(family, params, value)
            assert np.isfinite(ld)
            drawn = sample(family, params, rng, size=4)
            assert np.asarray(drawn).shape[0] == 4

    def test_fit_mle_dispatch(self):
        assert fit_mle("bernoulli", [1, 0, 0, 1]).p == pytest.approx(0.5)
        got = fit_mle("categorical", [0, 1, 1], num_categories=2)
        np.testing.assert_allclose(got.probs, [1 / 3, 2 / 3])
        assert fit_mle("poisson", [2, 4]).rate == pytest.approx(3.0)

    def test_mismatched_family_rejected(self):
        with pytest.raises(ParameterError):
            log_density("poisson", BernoulliParam(0.5), 1)
        with pytest.raises(ParameterError):
            log_density("weibull", BernoulliParam(0.5), 1)
