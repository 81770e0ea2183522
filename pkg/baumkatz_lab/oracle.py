#!/usr/bin/env python3
"""Baum-Katz Lab Oracle - 精确尾概率

两类精确来源：
- 高斯新息：S_n ~ N(0, σ² Σ_k a(n,k)²)，尾概率由 erfc 给出
- 有限支撑新息：枚举全部 m^n 个噪声字，S_n = Σ_k a(n,k) θ_k
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import special

from .config import ConfigManager
from .distributions import NoiseFamily, NoiseSpec, support
from .errors import EnumerationBudgetError, InvalidParameterError
from .model import ModelSpec, weight_row
from .result_cache import EnumerationCache, get_enumeration_cache

logger = logging.getLogger("baumkatz_lab")

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TailQuery:
    """事件 {|S_n| > ε n^(1/p)}

    threshold_override 用于直接给定阈值的查询（允许 0 与 inf）。
    """
    n: int
    p: float
    epsilon: float
    threshold_override: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError(f"n must be a positive integer, got {self.n}")
        if not 0 < self.p < 2:
            raise InvalidParameterError(f"p must lie in (0, 2), got {self.p}")
        if self.threshold_override is None:
            if not (math.isfinite(self.epsilon) and self.epsilon > 0):
                raise InvalidParameterError(f"epsilon must be positive, got {self.epsilon}")
        elif math.isnan(self.threshold_override) or self.threshold_override < 0:
            raise InvalidParameterError(f"threshold must be non-negative, got {self.threshold_override}")

    @classmethod
    def from_threshold(cls, n: int, threshold: float, p: float = 1.0) -> "TailQuery":
        epsilon = threshold / n ** (1.0 / p) if math.isfinite(threshold) else math.inf
        return cls(n=n, p=p, epsilon=epsilon, threshold_override=float(threshold))

    @property
    def threshold(self) -> float:
        if self.threshold_override is not None:
            return self.threshold_override
        return self.epsilon * self.n ** (1.0 / self.p)


# ---- 高斯 ----

def _check_sigma(sigma: float):
    if not (math.isfinite(sigma) and sigma > 0):
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")


def variance_of_sum(model: ModelSpec, n: int, sigma: float = 1.0) -> float:
    """Var S_n = σ² Σ_k a(n,k)²"""
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    _check_sigma(sigma)
    if model.is_constant and model.q == 1.0:
        # 整数运算，n(n+1)(2n+1)/6 总能整除
        return sigma * sigma * float(n * (n + 1) * (2 * n + 1) // 6)
    row = weight_row(n, model)
    return sigma * sigma * math.fsum(row * row)


def phi0(x: float) -> float:
    """Φ_0(x) = (2π)^(-1/2) ∫_0^x e^(-t²/2) dt，奇函数"""
    if math.isinf(x):
        return math.copysign(0.5, x)
    return 0.5 * float(special.erf(x / SQRT2))


def normal_cdf(x: float) -> float:
    return 0.5 * float(special.erfc(-x / SQRT2))


def exact_gaussian_tail(model: ModelSpec, query: TailQuery, sigma: float = 1.0) -> float:
    """P{|S_n| > threshold}，θ ~ N(0, σ²)

    1 - 2Φ_0(z) 直接写成 erfc(z/√2)，避免 z 较大时的相消。
    """
    threshold = query.threshold
    if threshold == 0:
        return 1.0
    if math.isinf(threshold):
        return 0.0
    sd = math.sqrt(variance_of_sum(model, query.n, sigma))
    return float(special.erfc(threshold / (sd * SQRT2)))


def gaussian_unit_root_limit(epsilon: float) -> float:
    """q=1、p=2/3 时尾概率的极限 2(1-Φ(ε√3))"""
    return float(special.erfc(epsilon * math.sqrt(3.0) / SQRT2))


# ---- 枚举 ----

@dataclass
class OutcomeTable:
    """全部噪声字的 S_n 及其概率

    dyadic=True（Rademacher）时各结果等概率 2^-n，probs 为 None。
    terms[i, k-1] = a(n,k) θ_k，仅在需要时构造。
    """
    n: int
    sums: np.ndarray
    probs: Optional[np.ndarray]
    dyadic: bool
    terms: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.sums.size)

    def probability(self, mask: np.ndarray) -> float:
        if self.dyadic:
            return int(np.count_nonzero(mask)) / self.size
        return math.fsum(self.probs[mask])

    def exact_probability(self, mask: np.ndarray) -> Fraction:
        if not self.dyadic:
            raise InvalidParameterError("exact rational probabilities need Rademacher noise")
        return Fraction(int(np.count_nonzero(mask)), self.size)

    def expectation(self, values: np.ndarray) -> float:
        if self.dyadic:
            return math.fsum(values) / self.size
        return math.fsum(values * self.probs)

    def tail_mask(self, threshold: float, strict: bool = True) -> np.ndarray:
        magnitude = np.abs(self.sums)
        return magnitude > threshold if strict else magnitude >= threshold


def outcome_count(spec: NoiseSpec, n: int) -> int:
    values, _ = support(spec)
    return len(values) ** n


def can_enumerate(spec: NoiseSpec, n: int, budget: int = None) -> bool:
    if not spec.has_finite_support:
        return False
    budget = budget if budget is not None else ConfigManager.get_config().enumeration.max_outcomes
    return outcome_count(spec, n) <= budget


def _build_table(model: ModelSpec, spec: NoiseSpec, n: int, with_terms: bool) -> OutcomeTable:
    values, probs = support(spec)
    row = weight_row(n, model)
    dyadic = spec.family is NoiseFamily.RADEMACHER

    # 外和构造，第一个坐标变化最慢，与 np.indices 的 C 序一致
    sums = np.zeros(1)
    table_probs = None if dyadic else np.ones(1)
    for k in range(n):
        sums = (sums[:, None] + row[k] * values[None, :]).ravel()
        if table_probs is not None:
            table_probs = (table_probs[:, None] * probs[None, :]).ravel()

    terms = None
    if with_terms:
        idx = np.indices((len(values),) * n).reshape(n, -1).T
        terms = values[idx] * row[None, :]
    return OutcomeTable(n=n, sums=sums, probs=table_probs, dyadic=dyadic, terms=terms)


def enumerate_outcomes(model: ModelSpec, spec: NoiseSpec, n: int, with_terms: bool = False,
                       cache: EnumerationCache = None, budget: int = None) -> OutcomeTable:
    """枚举 S_n 的全部取值

    Raises:
        InvalidParameterError: 噪声没有有限支撑
        EnumerationBudgetError: m^n 超出预算
    """
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    if not spec.has_finite_support:
        raise InvalidParameterError(f"{spec.describe()} has no finite support")
    model.check_horizon(n)
    budget = budget if budget is not None else ConfigManager.get_config().enumeration.max_outcomes
    required = outcome_count(spec, n)
    if required > budget:
        raise EnumerationBudgetError(required, budget)

    cache = cache if cache is not None else get_enumeration_cache()
    key = (model.key(), spec, n)
    table = cache.get(key)
    if table is None:
        logger.debug("[ORACLE] enumerating %d outcomes for %s, %s, n=%d",
                     required, model.describe(), spec.describe(), n)
        table = _build_table(model, spec, n, with_terms)
        cache.put(key, table)
    elif with_terms and table.terms is None:
        # 重新构造时 sums 的计算顺序不变，结果逐位相同
        table = _build_table(model, spec, n, with_terms=True)
        cache.put(key, table)
    return table


def enumerate_tail(model: ModelSpec, spec: NoiseSpec, query: TailQuery,
                   cache: EnumerationCache = None) -> float:
    """P{|S_n| > threshold}，精确枚举"""
    table = enumerate_outcomes(model, spec, query.n, cache=cache)
    return table.probability(table.tail_mask(query.threshold))


def enumerate_tail_exact(model: ModelSpec, spec: NoiseSpec, query: TailQuery,
                         cache: EnumerationCache = None) -> Fraction:
    """Rademacher 新息下的有理数尾概率 count / 2^n"""
    if spec.family is not NoiseFamily.RADEMACHER:
        raise InvalidParameterError("exact rational tails need Rademacher noise")
    table = enumerate_outcomes(model, spec, query.n, cache=cache)
    return table.exact_probability(table.tail_mask(query.threshold))
