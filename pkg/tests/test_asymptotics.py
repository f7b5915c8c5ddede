import math

import numpy as np
import pytest
from scipy.integrate import quad

from selectlik import (
    InvalidInputError,
    SelectionSteps,
    StudyObservation,
    WitnessSpec,
    limit_loglik,
    mills_ratio_check,
    truncated_exponential_logpdf,
    witness_logpdf,
    witness_loglik,
    witness_sup_error,
)
from selectlik.asymptotics import default_error_grid

A975 = 1.959963984540054
A95 = 1.6448536269514722


class TestTruncatedExponential:
    def test_zero_lower_bound_is_standard_exponential(self):
        xs = np.linspace(0, 10, 21)
        np.testing.assert_allclose(
            truncated_exponential_logpdf(xs, 0.0, math.inf), -xs
        )

    def test_integrates_to_one(self):
        val, _ = quad(
            lambda x: math.exp(truncated_exponential_logpdf(x, 1.3, 4.0)), 1.3, 4.0
        )
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_shifted_value(self):
        assert truncated_exponential_logpdf(2.0, 1.96, math.inf) == pytest.approx(
            -0.04, abs=1e-12
        )

    def test_outside_support(self):
        assert truncated_exponential_logpdf(1.0, 1.96, math.inf) == -math.inf

    def test_rejects_empty_interval(self):
        with pytest.raises(InvalidInputError):
            truncated_exponential_logpdf(1.0, 2.0, 2.0)


class TestWitnessLogpdf:
    def test_large_n_matches_exponential_limit(self):
        spec = WitnessSpec(n=1e6, a=A975)
        got = witness_logpdf(2.0, spec)
        assert got == pytest.approx(-0.04, abs=2e-3)

    def test_small_n_far_from_limit(self):
        spec = WitnessSpec(n=1.0, a=A975)
        xs = np.linspace(A975, A975 + 5, 200)
        gap = np.abs(
            np.exp(witness_logpdf(xs, spec))
            - np.exp(truncated_exponential_logpdf(xs, A975, math.inf))
        )
        assert gap.max() > 0.05

    def test_integrates_to_one(self):
        spec = WitnessSpec(n=100.0, a=A975)
        val, _ = quad(lambda x: math.exp(witness_logpdf(x, spec)), A975, A975 + 60)
        assert val == pytest.approx(1.0, abs=1e-8)


class TestWitnessSupError:
    def test_strictly_decreasing_in_n(self):
        grid = default_error_grid(A975, math.inf)
        errors = [
            witness_sup_error(WitnessSpec(n=n, a=A975), grid)
            for n in (10.0, 100.0, 10000.0)
        ]
        assert errors[2] < errors[1] < errors[0]

    def test_small_at_large_n(self):
        grid = default_error_grid(A975, math.inf)
        assert witness_sup_error(WitnessSpec(n=10000.0, a=A975), grid) < 1e-2

    def test_zero_outside_support(self):
        spec = WitnessSpec(n=100.0, a=A975, b=3.0)
        err = witness_sup_error(spec, np.array([5.0, 10.0]))
        assert err == 0.0


class TestMillsRatio:
    def test_value_at_one(self):
        assert mills_ratio_check(1.0) == pytest.approx(0.655, abs=1e-3)

    def test_approaches_one(self):
        assert mills_ratio_check(10.0) == pytest.approx(1.0, rel=0.01)

    def test_increasing_on_unit_to_forty(self):
        xs = np.linspace(1.0, 40.0, 100)
        vals = [mills_ratio_check(float(x)) for x in xs]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestLimitLoglik:
    def test_two_bands_single_component(self):
        steps = SelectionSteps(cuts=(0.0, 0.025, 1.0), weights=(1.0, 0.1))
        data = [StudyObservation(effect=2.5, se=1.0), StudyObservation(effect=3.0, se=1.0)]
        want = sum(
            truncated_exponential_logpdf(s.effect, s.se * A975, math.inf) for s in data
        )
        assert limit_loglik(data, steps) == pytest.approx(want, abs=1e-12)

    def test_order_invariance(self, step_setup):
        data = [
            StudyObservation(effect=2.5, se=1.0),
            StudyObservation(effect=1.8, se=1.0),
            StudyObservation(effect=3.1, se=1.2),
        ]
        assert limit_loglik(data, step_setup) == pytest.approx(
            limit_loglik(list(reversed(data)), step_setup), abs=1e-12
        )

    def test_last_band_study_warns_and_gives_log_zero(self, step_setup):
        data = [StudyObservation(effect=0.0, se=1.0)]
        with pytest.warns(UserWarning):
            assert limit_loglik(data, step_setup) == -math.inf

    def test_witness_loglik_converges_to_limit(self, step_setup):
        data = [
            StudyObservation(effect=2.5, se=1.0),
            StudyObservation(effect=1.8, se=1.0),
        ]
        lim = limit_loglik(data, step_setup)
        gaps = [abs(witness_loglik(data, step_setup, n) - lim) for n in (100.0, 10000.0)]
        assert gaps[1] < gaps[0]
        assert gaps[1] < 0.01
