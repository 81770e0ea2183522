#!/usr/bin/env python3
"""Baum-Katz Lab Inequalities - 概率不等式数值校验

每个检验把不等式两侧算成数值并逐一比较：
- 有限支撑噪声：全枚举，结果精确，不允许任何违反
- 其他噪声：Monte Carlo，两侧置信区间重叠的违反只标记不计失败

加权项 X_j = a(n,k) θ_k，部分和 S_j = Σ_{k<=j} X_k（固定 n）。
有限支撑的阈值在原子两侧各偏移 atom_offset 各检验一次。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .config import ConfigManager, InequalityConfig
from .distributions import NoiseSpec, abs_moment, is_mean_zero, median, sample_array, support
from .errors import EnumerationBudgetError, InvalidParameterError
from .events import EventEmitter, EventType, emit_if
from .model import ModelSpec, weight_row
from .montecarlo import TailMethod, simulate_sums, wilson_interval
from .oracle import can_enumerate, enumerate_outcomes
from .result_cache import EnumerationCache, get_enumeration_cache
from .streams import RandomStream

logger = logging.getLogger("baumkatz_lab")

# 固定 n 的 Lévy / Hoffmann-Jørgensen 检验上限
MAX_TERMS_N = 12
# Marcinkiewicz-Zygmund 比值在扫描内的最大/最小比上限
MZ_SPREAD_LIMIT = 1e3


@dataclass
class IneqReport:
    """一类不等式的校验结果

    worst_margin 为所有实例中 RHS - LHS 的最小值（有符号）。
    """
    name: str
    instances_checked: int
    violations: int
    worst_margin: float
    method: TailMethod
    flagged: int = 0
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def merge(self, other: "IneqReport") -> "IneqReport":
        method = TailMethod.MONTE_CARLO if TailMethod.MONTE_CARLO in (self.method, other.method) \
            else TailMethod.ENUMERATED
        details = dict(self.details)
        details.update(other.details)
        return IneqReport(name=self.name,
                          instances_checked=self.instances_checked + other.instances_checked,
                          violations=self.violations + other.violations,
                          worst_margin=min(self.worst_margin, other.worst_margin),
                          method=method, flagged=self.flagged + other.flagged, details=details)


@dataclass(frozen=True)
class _Quantity:
    """数值及其置信区间；精确值的区间退化"""
    value: float
    low: float
    high: float

    @classmethod
    def exact(cls, value: float) -> "_Quantity":
        return cls(value, value, value)

    def __add__(self, other: "_Quantity") -> "_Quantity":
        return _Quantity(self.value + other.value, self.low + other.low, self.high + other.high)

    def __mul__(self, other: "_Quantity") -> "_Quantity":
        # 只用于非负量
        return _Quantity(self.value * other.value, self.low * other.low, self.high * other.high)

    def scale(self, factor: float) -> "_Quantity":
        return _Quantity(self.value * factor, self.low * factor, self.high * factor)


class _Space:
    """一个随机量的取值集合：枚举（带概率）或 Monte Carlo 样本"""

    def __init__(self, values: np.ndarray, probs: Optional[np.ndarray] = None,
                 terms: Optional[np.ndarray] = None, confidence: float = 0.99):
        self.values = values
        self.probs = probs
        self.terms = terms
        self.confidence = confidence

    @property
    def exact(self) -> bool:
        return self.probs is not None

    @property
    def method(self) -> TailMethod:
        return TailMethod.ENUMERATED if self.exact else TailMethod.MONTE_CARLO

    def prob(self, mask: np.ndarray) -> _Quantity:
        if self.exact:
            return _Quantity.exact(math.fsum(self.probs[mask]))
        hits = int(np.count_nonzero(mask))
        low, high = wilson_interval(hits, mask.size, self.confidence)
        return _Quantity(hits / mask.size, low, high)

    def expect(self, x: np.ndarray) -> _Quantity:
        if self.exact:
            return _Quantity.exact(math.fsum(x * self.probs))
        mean = float(np.mean(x))
        z = float(stats.norm.ppf(0.5 + self.confidence / 2.0))
        half = z * float(np.std(x, ddof=1)) / math.sqrt(x.size)
        return _Quantity(mean, mean - half, mean + half)

    def median(self) -> float:
        """满足 F(m) >= 1/2 的最小 m"""
        if not self.exact:
            return float(np.quantile(self.values, 0.5, method="inverted_cdf"))
        order = np.argsort(self.values, kind="stable")
        cumulative = np.cumsum(self.probs[order])
        idx = min(int(np.searchsorted(cumulative, 0.5, side="left")), order.size - 1)
        return float(self.values[order[idx]])


class _Tally:
    def __init__(self, name: str, tolerance: float):
        self.name = name
        self.tolerance = tolerance
        self.method = TailMethod.ENUMERATED
        self.instances = 0
        self.violations = 0
        self.flagged = 0
        self.worst_margin = math.inf

    def use(self, *spaces: _Space):
        if any(not s.exact for s in spaces):
            self.method = TailMethod.MONTE_CARLO

    def compare(self, lhs: _Quantity, rhs: _Quantity):
        """记录 lhs <= rhs"""
        self.instances += 1
        margin = rhs.value - lhs.value
        self.worst_margin = min(self.worst_margin, margin)
        if margin >= -self.tolerance * max(1.0, abs(lhs.value), abs(rhs.value)):
            return
        if self.method is TailMethod.MONTE_CARLO and lhs.low <= rhs.high:
            self.flagged += 1
        else:
            self.violations += 1

    def report(self, **details) -> IneqReport:
        if self.violations:
            logger.warning("[INEQ] %s: %d violations, worst margin %.3g", self.name, self.violations,
                           self.worst_margin)
        return IneqReport(name=self.name, instances_checked=self.instances, violations=self.violations,
                          worst_margin=self.worst_margin, method=self.method, flagged=self.flagged,
                          details=details)


# ---- 样本空间构造 ----

def _settings() -> Tuple[InequalityConfig, float, int]:
    cfg = ConfigManager.get_config()
    return cfg.inequalities, cfg.simulation.confidence, cfg.enumeration.max_outcomes


def _theta_space(spec: NoiseSpec, seed: int) -> _Space:
    cfg, confidence, _ = _settings()
    if spec.has_finite_support:
        values, probs = support(spec)
        return _Space(values, probs)
    stream = RandomStream(seed, (0,))
    return _Space(sample_array(spec, stream.generator, cfg.mc_draws), confidence=confidence)


def _sum_space(model: ModelSpec, spec: NoiseSpec, n: int, need_terms: bool, seed: int,
               cache: EnumerationCache = None) -> _Space:
    cfg, confidence, _ = _settings()
    if can_enumerate(spec, n):
        table = enumerate_outcomes(model, spec, n, with_terms=need_terms, cache=cache)
        probs = table.probs if table.probs is not None else np.full(table.size, 1.0 / table.size)
        return _Space(table.sums, probs, table.terms)
    if need_terms:
        model.check_horizon(n)
        stream = RandomStream(seed, (n,))
        terms = sample_array(spec, stream.generator, (cfg.mc_draws, n)) * weight_row(n, model)
        return _Space(terms.sum(axis=1), terms=terms, confidence=confidence)
    return _Space(simulate_sums(model, spec, n, cfg.mc_draws, seed), confidence=confidence)


def _base_space(model: Optional[ModelSpec], spec: NoiseSpec, n: Optional[int], seed: int,
                cache: EnumerationCache = None) -> _Space:
    """model 为 None 时是 θ 本身，否则是 S_n"""
    if model is None:
        return _theta_space(spec, seed)
    if n is None or n < 1:
        raise InvalidParameterError(f"a positive n is needed together with a model, got {n}")
    return _sum_space(model, spec, n, False, seed, cache)


def _symmetrized_space(model: Optional[ModelSpec], spec: NoiseSpec, n: Optional[int],
                       first: _Space, cache: EnumerationCache = None) -> _Space:
    """X - X'，X' 为独立副本"""
    cfg, confidence, budget = _settings()
    if not first.exact:
        partner = _base_space(model, spec, n, cfg.seed + 1, cache)
        return _Space(first.values - partner.values, confidence=confidence)

    required = first.values.size ** 2
    if required > budget:
        raise EnumerationBudgetError(required, budget)
    cache = cache if cache is not None else get_enumeration_cache()
    key = ("sym", model.key() if model is not None else None, spec, n if model is not None else None)

    def build() -> Tuple[np.ndarray, np.ndarray]:
        values = (first.values[:, None] - first.values[None, :]).ravel()
        probs = (first.probs[:, None] * first.probs[None, :]).ravel()
        return values, probs

    values, probs = cache.get_or_compute(key, build)
    return _Space(values, probs)


def _thresholds(x: float, spec: NoiseSpec) -> List[float]:
    """有限支撑时在 x 两侧各偏移一次"""
    if not spec.has_finite_support:
        return [x]
    offset = _settings()[0].atom_offset
    return [x - offset, x + offset]


def _require_symmetric(spec: NoiseSpec):
    if not spec.is_symmetric:
        raise InvalidParameterError(f"this inequality needs symmetric noise, got {spec.describe()}")


def _require_moment(spec: NoiseSpec, s: float) -> float:
    moment = abs_moment(spec, s)
    if not moment.finite:
        raise InvalidParameterError(f"E|theta|^{s:g} is infinite for {spec.describe()}")
    return moment.value


def _require_terms_n(n: int):
    if not 1 <= n <= MAX_TERMS_N:
        raise InvalidParameterError(f"n must lie in 1..{MAX_TERMS_N}, got {n}")


# ---- 对称化 ----

def check_weak_symmetrization(spec: NoiseSpec, x: float, a: float = 0.0,
                              model: ModelSpec = None, n: int = None,
                              cache: EnumerationCache = None) -> IneqReport:
    """½P{|X-μX| >= x} <= P{|X^sym| >= x} <= 2P{|X-a| >= x/2}

    默认 X = θ；给出 model 与 n 时 X = S_n。
    """
    if not x > 0:
        raise InvalidParameterError(f"x must be positive, got {x}")
    cfg = _settings()[0]
    space = _base_space(model, spec, n, cfg.seed, cache)
    sym = _symmetrized_space(model, spec, n, space, cache)
    mu = median(spec) if model is None else space.median()

    tally = _Tally("weak_symmetrization", cfg.tolerance)
    tally.use(space, sym)
    for xt in _thresholds(x, spec):
        left = space.prob(np.abs(space.values - mu) >= xt).scale(0.5)
        middle = sym.prob(np.abs(sym.values) >= xt)
        right = space.prob(np.abs(space.values - a) >= xt / 2.0).scale(2.0)
        tally.compare(left, middle)
        tally.compare(middle, right)
    return tally.report(median=mu)


def check_symmetrization_moment(spec: NoiseSpec, m: float, a: float = 0.0,
                                model: ModelSpec = None, n: int = None,
                                cache: EnumerationCache = None) -> IneqReport:
    """½E|X-μX|^m <= E|X^sym|^m <= 2c E|X-a|^m，c = 1 (m <= 1) 或 2^(m-1)"""
    if not m > 0:
        raise InvalidParameterError(f"m must be positive, got {m}")
    _require_moment(spec, m)
    cfg = _settings()[0]
    space = _base_space(model, spec, n, cfg.seed, cache)
    sym = _symmetrized_space(model, spec, n, space, cache)
    mu = median(spec) if model is None else space.median()
    c = 1.0 if m <= 1 else 2.0 ** (m - 1.0)

    tally = _Tally("symmetrization_moment", cfg.tolerance)
    tally.use(space, sym)
    left = space.expect(np.abs(space.values - mu) ** m).scale(0.5)
    middle = sym.expect(np.abs(sym.values) ** m)
    right = space.expect(np.abs(space.values - a) ** m).scale(2.0 * c)
    tally.compare(left, middle)
    tally.compare(middle, right)
    return tally.report(c=c, sym_moment=middle.value)


def check_desymmetrization(model: ModelSpec, spec: NoiseSpec, n: int, c: float,
                           cache: EnumerationCache = None) -> IneqReport:
    """P{|S_n| > 2c}·P{|S_n'| <= c} <= P{|S_n^sym| > c}"""
    if not c > 0:
        raise InvalidParameterError(f"c must be positive, got {c}")
    cfg = _settings()[0]
    space = _base_space(model, spec, n, cfg.seed, cache)
    sym = _symmetrized_space(model, spec, n, space, cache)

    tally = _Tally("desymmetrization", cfg.tolerance)
    tally.use(space, sym)
    for ct in _thresholds(c, spec):
        magnitude = np.abs(space.values)
        left = space.prob(magnitude > 2.0 * ct) * space.prob(magnitude <= ct)
        right = sym.prob(np.abs(sym.values) > ct)
        tally.compare(left, right)
    return tally.report()


# ---- 加权和 ----

def _partial_maxima(terms: np.ndarray) -> np.ndarray:
    return np.max(np.abs(np.cumsum(terms, axis=1)), axis=1)


def check_levy(model: ModelSpec, spec: NoiseSpec, n: int, x: float,
               cache: EnumerationCache = None) -> IneqReport:
    """P{|S_n| > x} >= ½P{max_j |S_j| > x} >= ½P{max_j |X_j| > 2x}"""
    _require_symmetric(spec)
    _require_terms_n(n)
    if not x > 0:
        raise InvalidParameterError(f"x must be positive, got {x}")
    cfg = _settings()[0]
    space = _sum_space(model, spec, n, True, cfg.seed, cache)
    max_partial = _partial_maxima(space.terms)
    max_term = np.max(np.abs(space.terms), axis=1)

    tally = _Tally("levy", cfg.tolerance)
    tally.use(space)
    for xt in _thresholds(x, spec):
        tail = space.prob(np.abs(space.values) > xt)
        partial = space.prob(max_partial > xt).scale(0.5)
        single = space.prob(max_term > 2.0 * xt).scale(0.5)
        tally.compare(partial, tail)
        tally.compare(single, partial)
    return tally.report()


def check_hoffmann_jorgensen(model: ModelSpec, spec: NoiseSpec, n: int, s: float, t: float,
                             cache: EnumerationCache = None) -> IneqReport:
    """P{|S_n| >= 2t+s} <= 4(P{|S_n| >= t})² + P{max_j |X_j| >= s}"""
    _require_symmetric(spec)
    _require_terms_n(n)
    if not (s > 0 and t > 0):
        raise InvalidParameterError(f"s and t must be positive, got s={s}, t={t}")
    cfg = _settings()[0]
    space = _sum_space(model, spec, n, True, cfg.seed, cache)
    magnitude = np.abs(space.values)
    max_term = np.max(np.abs(space.terms), axis=1)

    tally = _Tally("hoffmann_jorgensen", cfg.tolerance)
    tally.use(space)
    for st, tt in zip(_thresholds(s, spec), _thresholds(t, spec)):
        lhs = space.prob(magnitude >= 2.0 * tt + st)
        at_t = space.prob(magnitude >= tt)
        rhs = (at_t * at_t).scale(4.0) + space.prob(max_term >= st)
        tally.compare(lhs, rhs)
    return tally.report()


def _mz_ratio(model: ModelSpec, spec: NoiseSpec, n: int, m: float,
              cache: EnumerationCache = None) -> Tuple[_Space, _Quantity, _Quantity]:
    cfg = _settings()[0]
    space = _sum_space(model, spec, n, True, cfg.seed, cache)
    lhs = space.expect(np.abs(space.values) ** m)
    rhs = space.expect(np.sum(space.terms ** 2, axis=1) ** (m / 2.0))
    return space, lhs, rhs


def check_marcinkiewicz_zygmund(model: ModelSpec, spec: NoiseSpec, n: int, m: float,
                                cache: EnumerationCache = None) -> IneqReport:
    """ρ = E|S_n|^m / E(Σ X_j²)^(m/2)

    m = 2 时要求 ρ = 1；其余 m 只记录 ρ。
    """
    if m < 1:
        raise InvalidParameterError(f"m must be at least 1, got {m}")
    if not is_mean_zero(spec):
        raise InvalidParameterError(f"{spec.describe()} is not mean-zero")
    _require_moment(spec, m)
    _require_terms_n(n)
    cfg = _settings()[0]
    space, lhs, rhs = _mz_ratio(model, spec, n, m, cache)
    ratio = lhs.value / rhs.value

    tally = _Tally("marcinkiewicz_zygmund", cfg.tolerance)
    tally.use(space)
    if m == 2:
        # 两个方向都比较即相等
        tally.compare(lhs, rhs)
        tally.compare(rhs, lhs)
    return tally.report(ratio=ratio, n=n, m=m)


def mz_sweep(model: ModelSpec, spec: NoiseSpec, m: float, ns: Iterable[int] = range(2, 13),
             cache: EnumerationCache = None) -> IneqReport:
    """在 n 网格上记录经验常数 a_m = min ρ, b_m = max ρ"""
    merged: Optional[IneqReport] = None
    ratios: Dict[int, float] = {}
    for n in ns:
        report = check_marcinkiewicz_zygmund(model, spec, n, m, cache)
        ratios[n] = report.details["ratio"]
        merged = report if merged is None else merged.merge(report)
    if merged is None:
        raise InvalidParameterError("mz_sweep needs at least one n")

    a_m, b_m = min(ratios.values()), max(ratios.values())
    spread_ok = b_m / a_m < MZ_SPREAD_LIMIT
    merged.instances_checked += 1
    merged.worst_margin = min(merged.worst_margin, MZ_SPREAD_LIMIT - b_m / a_m)
    if not spread_ok:
        merged.violations += 1
    merged.details = {"m": m, "a_m": a_m, "b_m": b_m, "ratios": ratios}
    return merged


def check_cr(model: ModelSpec, spec: NoiseSpec, n: int, r: float,
             cache: EnumerationCache = None) -> IneqReport:
    """E|S_n|^r <= c_r Σ_j E|X_j|^r，c_r = 1 (r <= 1) 或 n^(r-1)"""
    if not r > 0:
        raise InvalidParameterError(f"r must be positive, got {r}")
    moment = _require_moment(spec, r)
    cfg = _settings()[0]
    space = _sum_space(model, spec, n, False, cfg.seed, cache)
    c_r = 1.0 if r <= 1 else float(n) ** (r - 1.0)
    row = weight_row(n, model)

    tally = _Tally("c_r", cfg.tolerance)
    tally.use(space)
    lhs = space.expect(np.abs(space.values) ** r)
    rhs = _Quantity.exact(c_r * math.fsum(np.abs(row) ** r) * moment)
    tally.compare(lhs, rhs)
    return tally.report(c_r=c_r)


def check_moment_growth(model: ModelSpec, spec: NoiseSpec, n: int, r: float,
                        cache: EnumerationCache = None) -> IneqReport:
    """|q| < 1, 0 < r <= 1：E|S_n|^r <= (2/(1-q))^r E|θ|^r n"""
    if not model.is_constant or abs(model.q) >= 1:
        raise InvalidParameterError("moment growth bound needs a constant |q| < 1")
    if not 0 < r <= 1:
        raise InvalidParameterError(f"r must lie in (0, 1], got {r}")
    moment = _require_moment(spec, r)
    cfg = _settings()[0]
    space = _sum_space(model, spec, n, False, cfg.seed, cache)

    tally = _Tally("moment_growth", cfg.tolerance)
    tally.use(space)
    lhs = space.expect(np.abs(space.values) ** r)
    rhs = _Quantity.exact((2.0 / (1.0 - model.q)) ** r * moment * n)
    tally.compare(lhs, rhs)
    return tally.report()


# ---- 幂平均 ----

# 幂平均两边的相对容差
POWER_MEAN_SLACK = 1e-12


def _power_mean_margin(arr: np.ndarray, r: float) -> float:
    """n^max(0, r/2-1) Σ a_i^r · (1 + slack) - (Σ a_i²)^(r/2)"""
    lhs = math.fsum(arr ** 2) ** (r / 2.0)
    rhs = arr.size ** max(0.0, r / 2.0 - 1.0) * math.fsum(arr ** r)
    return rhs * (1.0 + POWER_MEAN_SLACK) - lhs


def check_power_mean(values: Sequence[float], r: float) -> bool:
    """(Σ a_i²)^(r/2) <= n^max(0, r/2-1) Σ a_i^r"""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or np.any(arr <= 0):
        raise InvalidParameterError("values must be a non-empty list of positive numbers")
    if not r > 0:
        raise InvalidParameterError(f"r must be positive, got {r}")
    return _power_mean_margin(arr, r) >= 0.0


def power_mean_sweep(tuples: int = None, max_len: int = 16, max_r: float = 8.0,
                     seed: int = None) -> IneqReport:
    """随机元组扫描"""
    cfg = _settings()[0]
    tuples = tuples if tuples is not None else cfg.power_mean_tuples
    rng = RandomStream(seed if seed is not None else cfg.seed, (1,)).generator
    violations = 0
    worst = math.inf
    for _ in range(tuples):
        size = int(rng.integers(1, max_len + 1))
        values = rng.uniform(1e-3, 10.0, size)
        # (0, max_r]
        r = float(max_r - rng.uniform(0.0, max_r))
        margin = _power_mean_margin(values, r)
        worst = min(worst, margin)
        if margin < 0.0:
            violations += 1
    return IneqReport(name="power_mean", instances_checked=tuples, violations=violations,
                      worst_margin=worst, method=TailMethod.ENUMERATED)


# ---- 默认扫描 ----

SWEEP_QS = (-1.0, -0.5, 0.0, 0.5, 1.0)
SWEEP_NS = (1, 2, 3, 4, 6, 8, 10)


def run_default_sweep(events: EventEmitter = None, cache: EnumerationCache = None) -> List[IneqReport]:
    """全部不等式在默认网格上的枚举校验，每类合并为一份报告"""
    cache = cache if cache is not None else get_enumeration_cache()
    rademacher = NoiseSpec.rademacher()
    two_point = NoiseSpec.shifted_two_point(-1.0, 2.0, 2.0 / 3.0)
    both = (rademacher, two_point)
    reports: Dict[str, IneqReport] = {}

    def add(report: IneqReport):
        reports[report.name] = reports[report.name].merge(report) if report.name in reports else report

    for spec in both:
        for x in (0.5, 1.0, 1.5, 2.0, 3.0):
            for a in (0.0, 0.5):
                add(check_weak_symmetrization(spec, x, a, cache=cache))
        for m in (0.5, 1.0, 2.0, 3.0):
            add(check_symmetrization_moment(spec, m, 0.0, cache=cache))

    for q in SWEEP_QS:
        model = ModelSpec.constant(q)
        for n in SWEEP_NS:
            logger.debug("[INEQ] sweep q=%g n=%d", q, n)
            grid = [0.5 * j for j in range(1, 4 * n + 1)]
            for spec in both:
                for x in (0.5, 1.0, 2.0, float(n)):
                    add(check_weak_symmetrization(spec, x, 0.0, model, n, cache))
                    add(check_desymmetrization(model, spec, n, x, cache))
                for m in (1.0, 2.0):
                    add(check_symmetrization_moment(spec, m, 0.0, model, n, cache))
                for r in (0.5, 1.0, 2.0, 3.0):
                    add(check_cr(model, spec, n, r, cache))
                if abs(q) < 1:
                    for r in (0.25, 0.5, 1.0):
                        add(check_moment_growth(model, spec, n, r, cache))
            for x in grid:
                add(check_levy(model, rademacher, n, x, cache))
            for s in grid:
                for t in grid:
                    add(check_hoffmann_jorgensen(model, rademacher, n, s, t, cache))
        for spec in both:
            for m in (1.0, 2.0, 3.0, 4.0):
                add(mz_sweep(model, spec, m, range(2, max(SWEEP_NS) + 1), cache))

    add(power_mean_sweep())
    result = list(reports.values())
    for report in result:
        logger.info("[INEQ] %s: %d instances, %d violations, worst margin %.3g",
                    report.name, report.instances_checked, report.violations, report.worst_margin)
        emit_if(events, EventType.INEQUALITY_CHECKED,
                {"name": report.name, "instances": report.instances_checked,
                 "violations": report.violations}, "ineq")
    return result
