"""精确尾概率测试"""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from baumkatz_lab.distributions import NoiseSpec
from baumkatz_lab.errors import EnumerationBudgetError, InvalidParameterError
from baumkatz_lab.model import ModelSpec, weight_row
from baumkatz_lab.oracle import (TailQuery, enumerate_outcomes, enumerate_tail, enumerate_tail_exact,
                                 exact_gaussian_tail, gaussian_unit_root_limit, phi0, variance_of_sum)
from baumkatz_lab.result_cache import create_enumeration_cache

UNIT_ROOT = ModelSpec.constant(1.0)
RADEMACHER = NoiseSpec.rademacher()


class TestTailQuery:
    def test_threshold(self):
        assert TailQuery(n=8, p=1.5, epsilon=2.0).threshold == pytest.approx(2.0 * 8 ** (2 / 3))

    @pytest.mark.parametrize("kwargs", [
        dict(n=0, p=1.0, epsilon=1.0),
        dict(n=3, p=2.0, epsilon=1.0),
        dict(n=3, p=0.0, epsilon=1.0),
        dict(n=3, p=1.0, epsilon=0.0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidParameterError):
            TailQuery(**kwargs)

    def test_from_threshold(self):
        assert TailQuery.from_threshold(2, 1.5).threshold == 1.5
        assert TailQuery.from_threshold(2, 0.0).threshold == 0.0
        assert math.isinf(TailQuery.from_threshold(2, math.inf).threshold)


class TestVariance:
    def test_unit_root_formula(self):
        assert variance_of_sum(UNIT_ROOT, 3, 1.0) == 14.0

    def test_iid(self):
        assert variance_of_sum(ModelSpec.constant(0.0), 10, 2.0) == pytest.approx(40.0)

    def test_half(self):
        assert variance_of_sum(ModelSpec.constant(0.5), 2, 1.0) == pytest.approx(3.25)

    @pytest.mark.parametrize("n", [1, 17, 1000, 1_000_000])
    def test_unit_root_matches_weights(self, n):
        row = weight_row(n, UNIT_ROOT)
        direct = math.fsum(row * row)
        assert variance_of_sum(UNIT_ROOT, n) == pytest.approx(direct, rel=1e-12)
        assert variance_of_sum(UNIT_ROOT, n) == pytest.approx(n * (n + 1) * (2 * n + 1) / 6, rel=1e-12)

    def test_rejects_zero_n(self):
        with pytest.raises(InvalidParameterError):
            variance_of_sum(UNIT_ROOT, 0)


class TestGaussian:
    def test_phi0(self):
        assert phi0(0.0) == 0.0
        assert phi0(math.inf) == 0.5
        assert phi0(1.0) == pytest.approx(0.3413447460685429, rel=1e-14)
        assert phi0(-1.3) == -phi0(1.3)

    def test_single_iid_term(self):
        query = TailQuery(n=1, p=2.0 - 1e-12, epsilon=1.0)
        expected = 2 * (1 - stats.norm.cdf(1.0))
        assert exact_gaussian_tail(ModelSpec.constant(0.0), query) == pytest.approx(expected, rel=1e-9)

    def test_unit_root_n3(self):
        query = TailQuery(n=3, p=1.999999999999, epsilon=1.0)
        expected = 2 * (1 - stats.norm.cdf(math.sqrt(3) / math.sqrt(14)))
        assert exact_gaussian_tail(UNIT_ROOT, query) == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(0.6434, abs=1e-3)

    def test_threshold_zero_and_inf(self):
        assert exact_gaussian_tail(ModelSpec.constant(0.3), TailQuery.from_threshold(5, 0.0)) == 1.0
        assert exact_gaussian_tail(ModelSpec.constant(0.3), TailQuery.from_threshold(5, math.inf)) == 0.0

    def test_two_thirds_limit(self):
        limit = gaussian_unit_root_limit(1.0)
        assert limit == pytest.approx(0.083265, abs=1e-6)
        for n in (10_000, 100_000, 1_000_000):
            tail = exact_gaussian_tail(UNIT_ROOT, TailQuery(n=n, p=2.0 / 3.0, epsilon=1.0))
            assert abs(tail - limit) < 1e-3

    def test_p07_increases(self):
        tails = [exact_gaussian_tail(UNIT_ROOT, TailQuery(n=n, p=0.7, epsilon=1.0)) for n in (100, 10_000, 1_000_000)]
        assert tails[0] < tails[1] < tails[2]

    def test_monotone_in_epsilon(self):
        model = ModelSpec.constant(-0.6)
        tails = [exact_gaussian_tail(model, TailQuery(n=50, p=1.2, epsilon=e)) for e in np.linspace(0.1, 5, 30)]
        assert all(0.0 <= t <= 1.0 for t in tails)
        assert all(b <= a for a, b in zip(tails, tails[1:]))


class TestEnumeration:
    def test_iid_two_steps(self):
        assert enumerate_tail(ModelSpec.constant(0.0), RADEMACHER, TailQuery.from_threshold(2, 1.5)) == 0.5

    def test_unit_root_two_steps(self):
        assert enumerate_tail(UNIT_ROOT, RADEMACHER, TailQuery.from_threshold(2, 2.5)) == 0.5

    def test_above_range(self):
        spec = NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)
        assert enumerate_tail(ModelSpec.constant(0.5), spec, TailQuery.from_threshold(6, 100.0)) == 0.0

    def test_exact_fraction_complement(self):
        model = ModelSpec.constant(-0.5)
        for threshold in (0.1, 0.75, 1.5, 2.25):
            above = enumerate_tail_exact(model, RADEMACHER, TailQuery.from_threshold(7, threshold))
            table = enumerate_outcomes(model, RADEMACHER, 7)
            below = table.exact_probability(~table.tail_mask(threshold))
            assert isinstance(above, Fraction)
            assert above + below == 1
            assert float(above) == enumerate_tail(model, RADEMACHER, TailQuery.from_threshold(7, threshold))

    def test_exact_needs_rademacher(self):
        spec = NoiseSpec.shifted_two_point(-1.0, 2.0, 0.5)
        with pytest.raises(InvalidParameterError):
            enumerate_tail_exact(UNIT_ROOT, spec, TailQuery.from_threshold(2, 1.0))

    def test_two_point_probabilities(self):
        spec = NoiseSpec.shifted_two_point(-1.0, 2.0, 0.25)
        table = enumerate_outcomes(ModelSpec.constant(0.0), spec, 3)
        assert math.fsum(table.probs) == pytest.approx(1.0, abs=1e-15)
        # S_3 = 6 只有全取 2
        assert table.probability(table.sums == 6.0) == pytest.approx(0.75 ** 3)

    def test_outcome_order_matches_terms(self):
        model = ModelSpec.constant(0.5)
        table = enumerate_outcomes(model, RADEMACHER, 5, with_terms=True)
        np.testing.assert_allclose(table.terms.sum(axis=1), table.sums, rtol=1e-14, atol=1e-14)

    def test_budget(self):
        with pytest.raises(EnumerationBudgetError) as info:
            enumerate_outcomes(UNIT_ROOT, RADEMACHER, 30)
        assert info.value.required == 2 ** 30
        assert info.value.budget == 2 ** 24

    def test_needs_finite_support(self):
        with pytest.raises(InvalidParameterError):
            enumerate_tail(UNIT_ROOT, NoiseSpec.normal(), TailQuery.from_threshold(2, 1.0))

    def test_cache_reused(self):
        cache = create_enumeration_cache(4)
        first = enumerate_outcomes(UNIT_ROOT, RADEMACHER, 6, cache=cache)
        second = enumerate_outcomes(UNIT_ROOT, RADEMACHER, 6, cache=cache)
        assert first is second
        assert cache.hits == 1
