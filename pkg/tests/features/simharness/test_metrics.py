"""Tests for fairness, energy efficiency and bootstrap statistics."""

import math

import numpy as np
import pytest

from app.common.errors import DomainError
from app.features.simharness.metrics import (
    bootstrap_ordering,
    bootstrap_slope,
    energy_efficiency,
    jain_fairness,
)
from tests.utils.factories import jain_reference


@pytest.mark.unit
class TestJainFairness:
    @pytest.mark.parametrize(
        "rates,expected",
        [
            ([1, 1, 1, 1], 1.0),
            ([1, 0, 0, 0], 0.25),
            ([2, 1], 0.9),
            ([0, 0, 0], 0.0),
            ([3.0], 1.0),
        ],
    )
    def test_reference_values(self, rates, expected):
        assert jain_fairness(rates) == pytest.approx(expected)

    def test_matches_definition(self, rng):
        for _ in range(20):
            rates = rng.uniform(0.0, 5.0, size=int(rng.integers(1, 30)))
            assert jain_fairness(rates) == pytest.approx(jain_reference(rates))

    def test_bounds(self, rng):
        rates = rng.exponential(1.0, size=50)
        assert 1 / 50 <= jain_fairness(rates) <= 1.0

    def test_equal_rates_never_exceed_one(self):
        assert jain_fairness([0.1] * 7) <= 1.0

    @pytest.mark.parametrize("rates", [[], [-1.0, 2.0], [math.nan, 1.0], [math.inf]])
    def test_invalid_rates(self, rates):
        with pytest.raises(DomainError):
            jain_fairness(rates)


@pytest.mark.unit
class TestEnergyEfficiency:
    def test_bits_per_joule(self):
        assert energy_efficiency(3e9, 0.5) == pytest.approx(6e9)

    def test_nothing_spent_nothing_sent(self):
        assert energy_efficiency(0.0, 0.0) == 0.0

    def test_rate_without_power(self):
        with pytest.raises(DomainError) as exc:
            energy_efficiency(1.0, 0.0)
        assert exc.value.detail["sum_rate_bps"] == 1.0

    def test_negative_power(self):
        with pytest.raises(DomainError):
            energy_efficiency(1.0, -0.1)


@pytest.mark.unit
class TestBootstrap:
    def test_increasing_trend(self):
        xs = [0.0, 1.0, 2.0, 3.0]
        samples = [[2 * x - 0.1, 2 * x, 2 * x + 0.1] for x in xs]

        estimate = bootstrap_slope(xs, samples, resamples=200, rng=np.random.default_rng(1))

        assert estimate.slope == pytest.approx(2.0)
        assert estimate.low <= estimate.slope <= estimate.high
        assert estimate.positive
        assert not estimate.negative
        assert estimate.resamples == 200

    def test_decreasing_trend(self):
        xs = [0.1, 0.2, 0.3]
        samples = [[10 - 20 * x, 10.5 - 20 * x] for x in xs]

        assert bootstrap_slope(xs, samples, resamples=100).negative

    def test_needs_two_points(self):
        with pytest.raises(DomainError):
            bootstrap_slope([1.0], [[1.0, 2.0]])

    def test_paired_ordering(self):
        a = [2.5, 3.5, 4.0]
        b = [1.5, 2.5, 3.0]

        estimate = bootstrap_ordering(a, b, resamples=50)

        assert estimate.slope == pytest.approx(1.0)
        assert estimate.low == pytest.approx(1.0)
        assert estimate.positive

    def test_same_generator_same_interval(self):
        xs = [1.0, 2.0, 3.0]
        samples = [[1.0, 2.0, 4.0], [2.0, 3.0, 5.0], [4.0, 4.5, 6.0]]

        first = bootstrap_slope(xs, samples, resamples=100, rng=np.random.default_rng(5))
        second = bootstrap_slope(xs, samples, resamples=100, rng=np.random.default_rng(5))

        assert first == second
