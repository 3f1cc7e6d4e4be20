"""Harmonic-number correction for subset maxima, with a Monte Carlo oracle.

The expected maximum of k independent unit exponentials is the k-th
harmonic number, so the correction for estimating a max from a subset is
a ratio of harmonic numbers.  The Monte Carlo estimator is an
independent check on that closed form.
"""

import math

import numpy as np
import pytest

from sanlab.compensation import (
    SubsetPlan,
    compensation_factor,
    harmonic_expected_max,
    mc_expected_max,
    sample_filter_subset,
    subset_size,
)


class TestHarmonicExpectedMax:
    def test_small_values(self):
        assert harmonic_expected_max(1) == pytest.approx(1.0)
        assert harmonic_expected_max(2) == pytest.approx(1.5)
        assert harmonic_expected_max(4) == pytest.approx(1 + 0.5 + 1 / 3 + 0.25)

    def test_monotone(self):
        values = [harmonic_expected_max(k) for k in (1, 2, 8, 64, 512)]
        assert values == sorted(values)
        assert len(set(values)) == len(values)

    def test_log_growth(self):
        # H_k = ln k + gamma + O(1/k)
        gamma = 0.5772156649015329
        assert harmonic_expected_max(10**6) == pytest.approx(
            math.log(10**6) + gamma, abs=1e-5
        )

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            harmonic_expected_max(0)


class TestMonteCarloOracle:
    @pytest.mark.parametrize("k", [1, 4, 64, 256])
    def test_formula_matches_simulation(self, k):
        est = mc_expected_max(k, trials=200_000, seed=99)
        assert est == pytest.approx(harmonic_expected_max(k), rel=5e-3)

    def test_deterministic(self):
        a = mc_expected_max(16, trials=1000, seed=5)
        b = mc_expected_max(16, trials=1000, seed=5)
        assert a == b

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            mc_expected_max(0, trials=10, seed=0)
        with pytest.raises(ValueError):
            mc_expected_max(4, trials=0, seed=0)


class TestSubsetSize:
    def test_rounds_to_nearest(self):
        assert subset_size(100, 0.25) == 25
        assert subset_size(10, 0.26) == 3

    def test_round_half_to_even(self):
        # banker's rounding: 2.5 -> 2, 3.5 -> 4
        assert subset_size(10, 0.25) == 2
        assert subset_size(14, 0.25) == 4

    def test_rejects_empty_subset(self):
        with pytest.raises(ValueError):
            subset_size(100, 0.001)

    def test_rejects_rate_out_of_range(self):
        with pytest.raises(ValueError):
            subset_size(100, 0.0)
        with pytest.raises(ValueError):
            subset_size(100, 1.5)


class TestCompensationFactor:
    def test_full_rate_is_one(self):
        assert compensation_factor(64, 1.0) == pytest.approx(1.0)

    def test_known_value(self):
        # H_4096 / H_1024
        expected = harmonic_expected_max(4096) / harmonic_expected_max(1024)
        g = compensation_factor(4096, 0.25)
        assert g == pytest.approx(expected, rel=1e-12)
        assert g == pytest.approx(1.1846, abs=1e-4)

    def test_decreases_with_rate(self):
        gs = [compensation_factor(1024, r) for r in (0.1, 0.25, 0.5, 1.0)]
        assert gs == sorted(gs, reverse=True)

    def test_stays_modest_at_quarter_rate(self):
        # for realistically sized filter banks the correction stays small
        # even when only a quarter of the filters are kept
        for total in (256, 1024, 4096, 16384):
            assert 1.0 < compensation_factor(total, 0.25) < 1.3


class TestSubsetPlan:
    def test_sampling_is_deterministic(self):
        a = sample_filter_subset(16, 8, 0.5, seed=3)
        b = sample_filter_subset(16, 8, 0.5, seed=3)
        assert np.array_equal(a.indices, b.indices)
        assert a.total == 128
        assert len(a.indices) == subset_size(128, 0.5)

    def test_different_seeds_differ(self):
        a = sample_filter_subset(16, 16, 0.25, seed=1)
        b = sample_filter_subset(16, 16, 0.25, seed=2)
        assert not np.array_equal(a.indices, b.indices)

    def test_indices_sorted_unique_in_range(self):
        plan = sample_filter_subset(8, 8, 0.3, seed=7)
        idx = plan.indices
        assert np.array_equal(idx, np.sort(idx))
        assert len(np.unique(idx)) == len(idx)
        assert idx.min() >= 0 and idx.max() < 64

    def test_plan_validates_size(self):
        with pytest.raises(ValueError):
            SubsetPlan(total=64, rate=0.25, indices=np.arange(5), seed=0)

    def test_plan_validates_range(self):
        with pytest.raises(ValueError):
            SubsetPlan(total=4, rate=1.0, indices=np.array([0, 1, 2, 9]), seed=0)
