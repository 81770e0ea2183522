"""Monte Carlo 尾概率测试"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from baumkatz_lab.callbacks import CollectingEventHandler
from baumkatz_lab.distributions import NoiseSpec
from baumkatz_lab.errors import InvalidParameterError
from baumkatz_lab.events import EventEmitter, EventType
from baumkatz_lab.model import ModelSpec
from baumkatz_lab.montecarlo import (TailEstimate, TailMethod, block_layout, choose_method, estimate_tail,
                                     estimate_tails, simulate_sums, tail_curve, wilson_interval)
from baumkatz_lab.oracle import TailQuery, enumerate_tail, exact_gaussian_tail
from baumkatz_lab.series import SeriesParams
from baumkatz_lab.streams import RandomStream

RADEMACHER = NoiseSpec.rademacher()


class TestWilson:
    @settings(max_examples=200, deadline=None)
    @given(trials=st.integers(min_value=1, max_value=10 ** 7), data=st.data(),
           confidence=st.floats(min_value=0.5, max_value=0.9999))
    def test_bounds(self, trials, data, confidence):
        hits = data.draw(st.integers(min_value=0, max_value=trials))
        low, high = wilson_interval(hits, trials, confidence)
        assert 0.0 <= low <= hits / trials <= high <= 1.0

    def test_extremes_are_not_degenerate(self):
        low, high = wilson_interval(0, 1000)
        assert low == 0.0 and high > 0.0
        low, high = wilson_interval(1000, 1000)
        assert high == 1.0 and low < 1.0

    def test_narrower_at_lower_confidence(self):
        wide = wilson_interval(300, 1000, 0.99)
        narrow = wilson_interval(300, 1000, 0.9)
        assert wide[0] < narrow[0] and narrow[1] < wide[1]

    @pytest.mark.parametrize("hits,trials,confidence", [(1, 0, 0.99), (5, 4, 0.99), (1, 4, 1.0)])
    def test_rejects(self, hits, trials, confidence):
        with pytest.raises(InvalidParameterError):
            wilson_interval(hits, trials, confidence)


class TestTailEstimate:
    def test_exact_is_point(self):
        estimate = TailEstimate.exact(0.25, TailMethod.ENUMERATED)
        assert estimate.ci_low == estimate.point == estimate.ci_high == 0.25
        assert estimate.replications == 0
        assert estimate.method.is_exact

    def test_inconsistent_interval(self):
        with pytest.raises(InvalidParameterError):
            TailEstimate(point=0.5, ci_low=0.6, ci_high=0.7, replications=100, hits=50,
                         method=TailMethod.MONTE_CARLO, confidence=0.99)


class TestBlockLayout:
    def test_covers_replications(self):
        for n in (1, 7, 1000, 10 ** 6):
            layout = block_layout(n, 123_457)
            assert sum(layout) == 123_457
            assert all(rows >= 1 for rows in layout)

    def test_huge_n_single_rows(self):
        assert block_layout(1 << 23, 3) == [1, 1, 1]


class TestEstimateTail:
    def test_rademacher_iid(self):
        query = TailQuery.from_threshold(2, 1.5)
        estimate = estimate_tail(ModelSpec.constant(0.0), RADEMACHER, query, 10 ** 6, seed=3)
        low, high = wilson_interval(estimate.hits, estimate.replications, 0.999)
        assert low <= 0.5 <= high
        assert estimate.point == estimate.hits / estimate.replications
        assert estimate.method is TailMethod.MONTE_CARLO

    def test_impossible_event(self):
        spec = NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)
        query = TailQuery.from_threshold(5, 5 * 2.0 * 5 + 1)
        estimate = estimate_tail(ModelSpec.constant(1.0), spec, query, 1000, seed=1)
        assert estimate.point == 0.0 and estimate.hits == 0

    def test_gaussian_unit_root(self):
        model = ModelSpec.constant(1.0)
        query = TailQuery(n=3, p=1.999999999999, epsilon=1.0)
        estimate = estimate_tail(model, NoiseSpec.normal(1.0), query, 200_000, seed=11)
        exact = exact_gaussian_tail(model, query)
        assert estimate.ci_low <= exact <= estimate.ci_high

    def test_minimum_replications(self):
        with pytest.raises(InvalidParameterError):
            estimate_tail(ModelSpec.constant(0.0), RADEMACHER, TailQuery.from_threshold(2, 1.0), 99, seed=1)

    def test_confidence_from_config(self, fresh_config):
        fresh_config.simulation.confidence = 0.9
        estimate = estimate_tail(ModelSpec.constant(0.0), RADEMACHER, TailQuery.from_threshold(2, 1.0), 500, seed=1)
        assert estimate.confidence == 0.9


class TestDeterminism:
    @pytest.fixture
    def small_blocks(self, fresh_config):
        fresh_config.simulation.max_block_rows = 997
        return fresh_config

    def test_workers_do_not_change_hits(self, small_blocks):
        model = ModelSpec.constant(-0.5)
        spec = NoiseSpec.student_t(2.5)
        query = TailQuery(n=40, p=1.0, epsilon=0.8)
        results = [estimate_tail(model, spec, query, 20_000, seed=42, workers=w) for w in (1, 2, 4, 7)]
        assert len({r.hits for r in results}) == 1

    def test_sums_identical_across_workers(self, small_blocks):
        model = ModelSpec.constant(0.5)
        one = simulate_sums(model, NoiseSpec.uniform(1.0), 25, 5000, seed=9, workers=1)
        many = simulate_sums(model, NoiseSpec.uniform(1.0), 25, 5000, seed=9, workers=3)
        np.testing.assert_array_equal(one, many)

    def test_seed_changes_sample(self):
        model = ModelSpec.constant(0.5)
        first = simulate_sums(model, NoiseSpec.normal(), 10, 200, seed=1)
        second = simulate_sums(model, NoiseSpec.normal(), 10, 200, seed=2)
        assert not np.array_equal(first, second)

    def test_block_streams(self):
        # 第 b 块来自 (seed, n, b) 子流
        model = ModelSpec.constant(0.0)
        sums = simulate_sums(model, NoiseSpec.normal(), 3, 4, seed=5)
        noise = RandomStream(5, (3, 0)).generator.normal(0.0, 1.0, (4, 3))
        np.testing.assert_allclose(sums, noise.sum(axis=1), rtol=1e-12)

    def test_block_events(self, small_blocks):
        collector = CollectingEventHandler()
        events = EventEmitter("test")
        events.on(collector)
        simulate_sums(ModelSpec.constant(0.0), RADEMACHER, 4, 2000, seed=1, events=events)
        blocks = collector.of_type(EventType.BLOCK_DONE)
        assert len(blocks) == 3
        assert sum(e.data["rows"] for e in blocks) == 2000


class TestSharedSample:
    def test_monotone_in_epsilon(self):
        model = ModelSpec.constant(0.7)
        n = 30
        thresholds = [e * n for e in np.linspace(0.05, 3.0, 40)]
        estimates = estimate_tails(model, NoiseSpec.symmetric_pareto(1.5), n, thresholds, 50_000, seed=8)
        points = [e.point for e in estimates]
        assert all(b <= a for a, b in zip(points, points[1:]))


class TestTailCurve:
    def test_gaussian_is_exact(self):
        curve = tail_curve(ModelSpec.constant(0.5), NoiseSpec.normal(2.0), SeriesParams(1.0, 2.0, 1.0),
                           [2, 4, 8, 16], 1000, seed=1)
        assert [est.method for _, est in curve] == [TailMethod.EXACT_GAUSSIAN] * 4
        assert [n for n, _ in curve] == [2, 4, 8, 16]

    def test_rademacher_is_enumerated(self):
        curve = tail_curve(ModelSpec.constant(0.0), RADEMACHER, SeriesParams(1.0, 1.0, 0.5), [2, 4, 8], 1000, seed=1)
        assert all(est.method is TailMethod.ENUMERATED for _, est in curve)
        n, first = curve[0]
        assert first.point == enumerate_tail(ModelSpec.constant(0.0), RADEMACHER, TailQuery(n, 1.0, 0.5))

    def test_student_is_simulated(self):
        curve = tail_curve(ModelSpec.constant(0.0), NoiseSpec.student_t(1.5), SeriesParams(1.0, 1.0, 1.0),
                           [10, 100], 1000, seed=1)
        assert all(est.method is TailMethod.MONTE_CARLO for _, est in curve)

    def test_variable_gaussian_is_simulated(self):
        model = ModelSpec.from_sequence([0.5, -0.5] * 8)
        assert choose_method(model, NoiseSpec.normal(), 16) is TailMethod.MONTE_CARLO

    def test_budget_switches_to_simulation(self, fresh_config):
        fresh_config.enumeration.max_outcomes = 16
        curve = tail_curve(ModelSpec.constant(0.0), RADEMACHER, SeriesParams(1.0, 1.0, 0.5), [2, 4, 8], 1000, seed=1)
        assert [est.method for _, est in curve] == [TailMethod.ENUMERATED, TailMethod.ENUMERATED,
                                                     TailMethod.MONTE_CARLO]

    def test_tail_events(self):
        collector = CollectingEventHandler()
        events = EventEmitter()
        events.on(collector)
        tail_curve(ModelSpec.constant(1.0), NoiseSpec.normal(), SeriesParams(1.0, 1.0, 1.0), [1, 2, 3], 1000,
                   seed=1, events=events)
        assert [e.data["n"] for e in collector.of_type(EventType.TAIL_ESTIMATED)] == [1, 2, 3]

    @pytest.mark.parametrize("grid", [[], [4, 4], [8, 2]])
    def test_grid_checked(self, grid):
        with pytest.raises(InvalidParameterError):
            tail_curve(ModelSpec.constant(0.0), RADEMACHER, SeriesParams(1.0, 1.0, 1.0), grid, 1000, seed=1)


@pytest.mark.slow
def test_calibration_against_enumeration():
    rng = np.random.default_rng(2024)
    covered = 0
    for run in range(50):
        q = float(rng.uniform(-1.0, 1.0))
        n = int(rng.integers(1, 13))
        spec = RADEMACHER if run % 2 else NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)
        model = ModelSpec.constant(q)
        # 阈值取在原子之间，避免落在可达值上
        threshold = float(rng.uniform(0.1, 0.8)) * math.sqrt(n) * 1.5 + 1e-7
        query = TailQuery.from_threshold(n, threshold)
        exact = enumerate_tail(model, spec, query)
        estimate = estimate_tail(model, spec, query, 10 ** 6, seed=run + 1)
        covered += estimate.ci_low <= exact <= estimate.ci_high
    assert covered >= 47
