"""新息分布测试"""

import math

import numpy as np
import pytest
from scipy import stats

from baumkatz_lab.distributions import (NoiseFamily, NoiseSpec, abs_moment, abs_tail, is_mean_zero, mean,
                                        median, moment_finite, parse_noise, sample, sample_array, support,
                                        symmetrize, symmetrized_array, tail_index, variance)
from baumkatz_lab.errors import InvalidParameterError
from baumkatz_lab.streams import RandomStream

ALL_SPECS = [
    NoiseSpec.normal(1.0),
    NoiseSpec.normal(3.0),
    NoiseSpec.rademacher(),
    NoiseSpec.uniform(2.0),
    NoiseSpec.symmetric_pareto(2.5, 1.0),
    NoiseSpec.symmetric_pareto(1.5, 2.0),
    NoiseSpec.student_t(1.5),
    NoiseSpec.student_t(5.0),
    NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0),
]


def _rng(seed: int = 0) -> np.random.Generator:
    return RandomStream(seed).generator


class TestConstruction:
    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameterError):
            NoiseSpec.normal(0.0)
        with pytest.raises(InvalidParameterError):
            NoiseSpec.symmetric_pareto(-1.0)
        with pytest.raises(InvalidParameterError):
            NoiseSpec.shifted_two_point(-1.0, 2.0, 1.0)

    @pytest.mark.parametrize("text,expected", [
        ("normal:2", NoiseSpec.normal(2.0)),
        ("normal", NoiseSpec.normal(1.0)),
        ("rademacher", NoiseSpec.rademacher()),
        ("uniform:1", NoiseSpec.uniform(1.0)),
        ("pareto:1.5", NoiseSpec.symmetric_pareto(1.5, 1.0)),
        ("pareto:2.2,3", NoiseSpec.symmetric_pareto(2.2, 3.0)),
        ("student:1.8", NoiseSpec.student_t(1.8)),
        ("twopoint:-1,2,0.5", NoiseSpec.shifted_two_point(-1.0, 2.0, 0.5)),
    ])
    def test_parse_noise(self, text, expected):
        assert parse_noise(text) == expected

    @pytest.mark.parametrize("text", ["cauchy", "student", "pareto:a", "twopoint:1,2", "rademacher:3"])
    def test_parse_noise_rejects(self, text):
        with pytest.raises(InvalidParameterError):
            parse_noise(text)

    def test_describe_round_trips(self):
        for spec in ALL_SPECS:
            if spec.family is not NoiseFamily.SHIFTED_TWO_POINT:
                assert parse_noise(spec.describe()) == spec


class TestSample:
    def test_rademacher_support(self):
        values = sample_array(NoiseSpec.rademacher(), _rng(), 1000)
        assert set(np.unique(values)) == {-1.0, 1.0}

    def test_uniform_support(self):
        values = sample_array(NoiseSpec.uniform(2.0), _rng(), 10_000)
        assert values.min() >= -2.0 and values.max() <= 2.0

    def test_normal_mean(self):
        values = sample_array(NoiseSpec.normal(1.0), _rng(1), 1_000_000)
        assert abs(values.mean()) < 0.005

    def test_single_draw_is_deterministic(self):
        spec = NoiseSpec.student_t(3.0)
        assert sample(spec, RandomStream(5, (1,))) == sample(spec, RandomStream(5, (1,)))
        assert sample(spec, RandomStream(5, (1,))) != sample(spec, RandomStream(5, (2,)))

    def test_pareto_tail(self):
        spec = NoiseSpec.symmetric_pareto(1.5, 1.0)
        values = np.abs(sample_array(spec, _rng(2), 200_000))
        assert values.min() >= 1.0
        assert np.mean(values > 4.0) == pytest.approx(4.0 ** -1.5, abs=0.005)

    @pytest.mark.parametrize("spec,s", [
        (NoiseSpec.normal(1.0), 3.0),
        (NoiseSpec.uniform(1.0), 2.0),
        (NoiseSpec.symmetric_pareto(6.0, 1.0), 2.0),
        (NoiseSpec.student_t(8.0), 2.0),
    ])
    def test_sample_moments_converge(self, spec, s):
        values = np.abs(sample_array(spec, _rng(4), 1_000_000)) ** s
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - abs_moment(spec, s).value) < 5 * se


class TestMoments:
    def test_rademacher(self):
        assert abs_moment(NoiseSpec.rademacher(), 7.3).value == 1.0

    def test_pareto_at_index_is_infinite(self):
        assert math.isinf(abs_moment(NoiseSpec.symmetric_pareto(2.5), 2.5).value)

    def test_uniform_second(self):
        assert abs_moment(NoiseSpec.uniform(1.0), 2.0).value == pytest.approx(1.0 / 3.0)

    def test_normal_second(self):
        assert abs_moment(NoiseSpec.normal(1.0), 2.0).value == pytest.approx(1.0, rel=1e-14)
        assert abs_moment(NoiseSpec.normal(2.0), 1.0).value == pytest.approx(2.0 * math.sqrt(2 / math.pi))

    def test_student_is_numeric(self):
        moment = abs_moment(NoiseSpec.student_t(5.0), 2.0)
        assert moment.numeric
        assert moment.value == pytest.approx(5.0 / 3.0, rel=1e-7)

    def test_two_point(self):
        spec = NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)
        assert abs_moment(spec, 2.0).value == pytest.approx(2.0)
        assert variance(spec) == pytest.approx(2.0)

    def test_rejects_non_positive_order(self):
        with pytest.raises(InvalidParameterError):
            abs_moment(NoiseSpec.normal(), 0.0)

    @pytest.mark.parametrize("spec,s,expected", [
        (NoiseSpec.student_t(1.5), 2.0, False),
        (NoiseSpec.symmetric_pareto(2.5), 2.0, True),
        (NoiseSpec.normal(3.0), 100.0, True),
    ])
    def test_moment_finite(self, spec, s, expected):
        assert moment_finite(spec, s) is expected

    @pytest.mark.parametrize("spec", ALL_SPECS)
    def test_finiteness_agrees_on_grid(self, spec):
        for s in np.arange(0.25, 8.01, 0.25):
            if spec.family is NoiseFamily.STUDENT_T and s < spec.nu and s > spec.nu - 0.3:
                # 临界附近的数值积分收敛很慢
                continue
            assert moment_finite(spec, s) == abs_moment(spec, s).finite

    def test_tail_index(self):
        assert tail_index(NoiseSpec.normal()) == math.inf
        assert tail_index(NoiseSpec.shifted_two_point(-1, 2, 0.5)) == math.inf
        assert tail_index(NoiseSpec.symmetric_pareto(1.7)) == 1.7
        assert tail_index(NoiseSpec.student_t(2.5)) == 2.5

    def test_mean_zero(self):
        assert is_mean_zero(NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0))
        assert not is_mean_zero(NoiseSpec.shifted_two_point(-1.0, 2.0, 0.5))
        assert mean(NoiseSpec.shifted_two_point(-1.0, 2.0, 0.5)) == pytest.approx(0.5)


class TestTails:
    def test_pareto(self):
        spec = NoiseSpec.symmetric_pareto(1.5, 1.0)
        assert abs_tail(spec, 100.0) == pytest.approx(1e-3)
        assert abs_tail(spec, 0.5) == 1.0

    def test_normal(self):
        assert abs_tail(NoiseSpec.normal(1.0), 1.0) == pytest.approx(2 * (1 - stats.norm.cdf(1.0)), rel=1e-12)

    def test_student(self):
        assert abs_tail(NoiseSpec.student_t(3.0), 2.0) == pytest.approx(2 * stats.t.sf(2.0, 3.0))

    def test_finite_support_strictness(self):
        spec = NoiseSpec.rademacher()
        assert abs_tail(spec, 1.0) == 0.0
        assert abs_tail(spec, 1.0, strict=False) == 1.0

    def test_uniform(self):
        assert abs_tail(NoiseSpec.uniform(2.0), 0.5) == pytest.approx(0.75)


class TestSymmetrization:
    def test_rademacher_support(self):
        stream = RandomStream(9)
        for _ in range(50):
            assert symmetrize(NoiseSpec.rademacher(), stream) in (-2.0, 0.0, 2.0)

    def test_two_point_distribution(self):
        spec = NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)
        values = symmetrized_array(spec, _rng(11), 200_000)
        assert set(np.unique(values)) == {-3.0, 0.0, 3.0}
        assert np.mean(values == 0.0) == pytest.approx(5.0 / 9.0, abs=0.005)

    @pytest.mark.parametrize("spec", [NoiseSpec.normal(1.0), NoiseSpec.student_t(1.5),
                                      NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)])
    def test_symmetric_law(self, spec):
        values = symmetrized_array(spec, _rng(12), 100_000)
        half = values.size // 2
        result = stats.ks_2samp(values[:half], -values[half:])
        assert result.pvalue > 0.01

    @pytest.mark.parametrize("spec", [NoiseSpec.normal(1.0), NoiseSpec.uniform(1.0), NoiseSpec.rademacher()])
    def test_variance_doubles(self, spec):
        values = symmetrized_array(spec, _rng(13), 1_000_000)
        assert values.var() == pytest.approx(2 * variance(spec), rel=0.01)


class TestMedian:
    def test_symmetric(self):
        assert median(NoiseSpec.normal(5.0)) == 0.0
        assert median(NoiseSpec.symmetric_pareto(1.5)) == 0.0

    def test_two_point(self):
        assert median(NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)) == -1.0
        assert median(NoiseSpec.shifted_two_point(-1.0, 2.0, 0.25)) == 2.0

    def test_support_needs_finite_family(self):
        with pytest.raises(InvalidParameterError):
            support(NoiseSpec.normal())
