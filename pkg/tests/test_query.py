import math

import numpy as np
import pytest

from strataflow.errors import EmptyWindow, InsufficientSample
from strataflow.model import Item
from strataflow.query import (COUNT, MEAN, SUM, SampleRow, error_bound,
                              estimate_mean, estimate_substream_sum,
                              estimate_total_sum, evaluate_window,
                              sample_variance, variance_of_mean,
                              variance_of_sum)


def _row(sub, values, weight):
    return SampleRow(substream=sub,
                     items=tuple(Item(sub, float(v), i)
                                 for i, v in enumerate(values)),
                     weight=weight)


class TestEstimators:
    def test_substream_sum_weight_one(self):
        assert estimate_substream_sum(_row(1, [1, 2, 3], 1.0).items, 1.0) == 6

    def test_substream_sum_weighted(self):
        assert estimate_substream_sum(_row(1, [1, 2, 3], 2.0).items, 2.0) == 12

    def test_total_sum(self):
        assert estimate_total_sum([6.0]) == 6.0
        assert estimate_total_sum([6.0, 12.0]) == 18.0

    def test_mean_single_stratum(self):
        assert estimate_mean([(4.5, 200.0)]) == 4.5

    def test_mean_equal_counts(self):
        assert estimate_mean([(10.0, 100.0), (20.0, 100.0)]) == 15.0

    def test_mean_skewed_counts(self):
        assert estimate_mean([(10.0, 300.0), (20.0, 100.0)]) == 12.5

    def test_mean_empty(self):
        with pytest.raises(EmptyWindow):
            estimate_mean([])
        with pytest.raises(EmptyWindow):
            estimate_mean([(5.0, 0.0)])


class TestVariance:
    def test_sample_variance_basic(self):
        assert sample_variance(_row(1, [1, 2, 3], 1.0).items) == 1.0

    def test_sample_variance_constant(self):
        assert sample_variance(_row(1, [5, 5, 5, 5], 1.0).items) == 0.0

    def test_sample_variance_two_points(self):
        assert sample_variance(_row(1, [2, 4], 1.0).items) == 2.0

    def test_sample_variance_needs_two(self):
        with pytest.raises(InsufficientSample):
            sample_variance(_row(1, [2], 1.0).items)

    def test_variance_of_sum_full_sample(self):
        assert variance_of_sum([(10.0, 10, 3.0)]) == 0.0

    def test_variance_of_sum_arithmetic(self):
        assert variance_of_sum([(100.0, 10, 4.0)]) == 3600.0

    def test_variance_of_mean_full_sample(self):
        assert variance_of_mean([(1.0, 10, 4.0, 10.0)]) == 0.0

    def test_variance_of_mean_arithmetic(self):
        assert variance_of_mean([(1.0, 10, 4.0, 100.0)]) == \
            pytest.approx(0.36)


class TestErrorBound:
    def test_two_sigma(self):
        assert error_bound(4.0, 95) == 4.0

    def test_zero_variance(self):
        for conf in (68, 95, 99.7):
            assert error_bound(0.0, conf) == 0.0

    def test_three_sigma(self):
        assert error_bound(9.0, 99.7) == 9.0

    def test_monotone_in_confidence(self):
        bounds = [error_bound(7.3, c) for c in (68, 95, 99.7)]
        assert bounds == sorted(bounds)


class TestEvaluateWindow:
    def test_empty_window(self):
        res = evaluate_window(0, [])
        assert res[COUNT].estimate == 0.0
        assert res[SUM].estimate == 0.0
        assert math.isnan(res[MEAN].estimate)

    def test_simple_window(self):
        res = evaluate_window(3, [_row(1, [1, 2, 3], 1.0)])
        assert res[SUM].estimate == 6.0
        assert res[MEAN].estimate == 2.0
        assert res[COUNT].estimate == 3.0
        # sample == population: finite-population correction zeroes bounds
        assert res[SUM].error_bound == 0.0
        assert res[MEAN].error_bound == 0.0

    def test_diagnostics_count_identity(self):
        res = evaluate_window(0, [_row(1, [1, 2], 5.0), _row(2, [9], 3.0)])
        for d in res[SUM].per_substream:
            assert d.est_source_count == d.sample_size * d.weight
        thin = next(d for d in res[SUM].per_substream if d.substream == 2)
        assert thin.variance_understated and thin.sample_variance == 0.0

    def test_linearity_in_values(self):
        rows = [_row(1, [1, 2, 3, 4], 2.5), _row(2, [10, 20], 4.0)]
        scaled = [_row(r.substream, [it.value * 3.0 for it in r.items],
                       r.weight) for r in rows]
        base = evaluate_window(0, rows)
        big = evaluate_window(0, scaled)
        assert big[SUM].estimate == pytest.approx(3.0 * base[SUM].estimate)
        assert big[MEAN].estimate == pytest.approx(3.0 * base[MEAN].estimate)
        assert big[COUNT].estimate == base[COUNT].estimate

    def test_confidence_scales_bound(self):
        rows = [_row(1, [1.0, 5.0, 9.0, 2.0], 10.0)]
        b68 = evaluate_window(0, rows, 68)[SUM].error_bound
        b95 = evaluate_window(0, rows, 95)[SUM].error_bound
        b997 = evaluate_window(0, rows, 99.7)[SUM].error_bound
        assert b95 == pytest.approx(2 * b68)
        assert b997 == pytest.approx(3 * b68)


class TestVarianceCalibration:
    def test_sum_variance_matches_monte_carlo(self):
        # Fixed population of 2000 values; repeatedly draw SRSWOR samples
        # of 50 and check the analytic variance against the empirical
        # spread of the expanded-sum estimator.
        pop_rng = np.random.Generator(np.random.PCG64(3))
        values = pop_rng.normal(50.0, 12.0, 2000)
        c, y = 2000, 50
        w = c / y
        rng = np.random.Generator(np.random.PCG64(17))
        ests, variances = [], []
        for _ in range(800):
            pick = rng.choice(c, size=y, replace=False)
            sample = values[pick]
            ests.append(sample.sum() * w)
            s2 = sample.var(ddof=1)
            variances.append(variance_of_sum([(float(c), y, float(s2))]))
        ratio = np.var(ests, ddof=1) / np.mean(variances)
        assert 0.7 < ratio < 1.4
