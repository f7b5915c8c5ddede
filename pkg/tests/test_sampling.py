import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtri
from scipy.stats import kstest, norm

from selectlik import (
    InvalidInputError,
    ModelParams,
    RejectionBudgetError,
    SelectionSteps,
    SimulationConfig,
    band_index,
    basic_logpdf,
    hedges_cdf,
    mixture_probabilities,
    p_value,
    sample_basic,
    sample_hedges,
    simulate_hedges,
)


class TestSimulateHedges:
    def test_deterministic_given_seed(self, step_setup):
        params = ModelParams(theta0=0.5, tau=0.3, steps=step_setup)
        config = SimulationConfig(params=params, sigmas=(1.0,) * 30, seed=42)
        a = simulate_hedges(config)
        b = simulate_hedges(config)
        assert [s.effect for s in a.studies] == [s.effect for s in b.studies]
        assert np.array_equal(a.n_attempts, b.n_attempts)

    def test_uncensored_matches_marginal_normal(self, uncensored):
        params = ModelParams(theta0=0.3, tau=0.4, steps=uncensored)
        config = SimulationConfig(params=params, sigmas=(1.0,) * 5000, seed=0)
        xs = np.array([s.effect for s in sample_hedges(config)])
        res = kstest(xs, lambda v: norm.cdf(v, 0.3, math.hypot(0.4, 1.0)))
        assert res.pvalue > 0.01

    def test_band_frequencies_match_mixture(self, step_setup):
        params = ModelParams(theta0=0.0, tau=0.0, steps=step_setup)
        config = SimulationConfig(params=params, sigmas=(1.0,) * 5000, seed=3)
        data = sample_hedges(config)
        x = np.array([s.effect for s in data])
        bands = band_index(p_value(x, 1.0), step_setup)
        counts = np.bincount(bands, minlength=3)
        probs = mixture_probabilities(params, 1.0).probs
        for k in range(3):
            sd = math.sqrt(5000 * probs[k] * (1 - probs[k]))
            assert abs(counts[k] - 5000 * probs[k]) < 3 * sd

    def test_acceptance_rate_tracks_normalizer(self, step_setup):
        from selectlik import log_selection_normalizer

        params = ModelParams(theta0=0.0, tau=0.0, steps=step_setup)
        config = SimulationConfig(params=params, sigmas=(1.0,) * 3000, seed=9)
        result = simulate_hedges(config)
        c = math.exp(log_selection_normalizer(params, 1.0))
        assert result.acceptance_rate == pytest.approx(c, rel=0.1)

    def test_rejection_budget_error(self, step_setup):
        # a tiny budget with heavy censoring must blow the budget
        params = ModelParams(theta0=-5.0, tau=0.0, steps=step_setup)
        config = SimulationConfig(
            params=params, sigmas=(1.0,) * 3, seed=0, max_rejections_per_study=2
        )
        with pytest.raises(RejectionBudgetError):
            simulate_hedges(config)

    def test_rejects_empty_sigmas(self, step_setup):
        params = ModelParams(theta0=0.0, tau=0.0, steps=step_setup)
        with pytest.raises(InvalidInputError):
            SimulationConfig(params=params, sigmas=(), seed=0)


class TestSampleBasic:
    def test_support_constraint(self):
        data = sample_basic(0.0, 0.5, 1.0, 0.05, 500, seed=4)
        cut = ndtri(0.95)
        assert all(s.effect / s.se > cut for s in data)

    def test_ks_against_density(self):
        data = sample_basic(0.0, 0.0, 1.0, 0.025, 5000, seed=7)
        xs = np.array([s.effect for s in data])
        cut = ndtri(0.975)
        cdf = lambda v: np.clip((norm.cdf(v) - norm.cdf(cut)) / 0.025, 0.0, 1.0)
        assert kstest(xs, cdf).pvalue > 0.01

    def test_mean_matches_quadrature_oracle(self):
        data = sample_basic(0.0, 0.0, 1.0, 0.025, 5000, seed=8)
        xs = np.array([s.effect for s in data])
        cut = ndtri(0.975)
        m1, _ = quad(lambda x: x * math.exp(basic_logpdf(x, 0, 0, 1, 0.025)), cut, 15)
        m2, _ = quad(lambda x: x * x * math.exp(basic_logpdf(x, 0, 0, 1, 0.025)), cut, 15)
        se = math.sqrt((m2 - m1**2) / len(xs))
        assert abs(xs.mean() - m1) < 3 * se

    def test_deep_tail_inversion(self):
        # mean 30 sds below the cutoff: rejection would never terminate
        data = sample_basic(-30.0, 0.0, 1.0, 0.025, 100, seed=1)
        cut = ndtri(0.975)
        assert all(s.effect > cut for s in data)
        assert all(map(lambda s: math.isfinite(s.effect), data))

    def test_deterministic(self):
        a = sample_basic(0.0, 0.2, 1.0, 0.05, 50, seed=5)
        b = sample_basic(0.0, 0.2, 1.0, 0.05, 50, seed=5)
        assert [s.effect for s in a] == [s.effect for s in b]


class TestHedgesSampleAgainstCdf:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_ks_against_model_cdf(self, step_setup, seed):
        params = ModelParams(theta0=0.0, tau=0.5, steps=step_setup)
        config = SimulationConfig(params=params, sigmas=(1.0,) * 2000, seed=seed)
        xs = np.array([s.effect for s in sample_hedges(config)])
        res = kstest(xs, lambda v: hedges_cdf(v, params, 1.0))
        assert res.pvalue > 0.01
