#!/usr/bin/env python3
"""Baum-Katz Lab Series - 级数累加、诊断与理论判定

    Σ_n n^(r/p-2) P{|S_n| > ε n^(1/p)}

- accumulate: 由尾概率曲线得到各项、部分和与经验斜率判定
- predict: 按系数区间与矩条件给出理论判定
- necessity_lower_bound: 必要性方向的逐项下界
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import ConfigManager, DiagnosticsConfig
from .distributions import NoiseFamily, NoiseSpec, abs_tail, is_mean_zero, moment_finite
from .errors import InvalidParameterError, SideConditionError
from .events import EventEmitter, EventType, emit_if
from .model import ModelSpec
from .montecarlo import TailEstimate

logger = logging.getLogger("baumkatz_lab")

# 网格间隔不超过该值时逐项精确求和，否则用中点积分
EXACT_GAP = 1 << 20
UNIT_ROOT_P_LIMIT = 2.0 / 3.0

SERIES_COLUMNS = ["n", "tail", "ci_low", "ci_high", "method", "term", "partial_sum"]


@dataclass(frozen=True)
class SeriesParams:
    """级数参数 (p, r, ε)"""
    p: float
    r: float
    epsilon: float

    def __post_init__(self):
        if not 0 < self.p < 2:
            raise InvalidParameterError(f"p must lie in (0, 2), got {self.p}")
        if not (math.isfinite(self.r) and self.r >= self.p):
            raise InvalidParameterError(f"r must satisfy r >= p, got r={self.r}, p={self.p}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidParameterError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def exponent(self) -> float:
        """项权重 n^(r/p-2) 的指数"""
        return self.r / self.p - 2.0

    def describe(self) -> str:
        return f"p={self.p:g} r={self.r:g} eps={self.epsilon:g}"


class VerdictKind(Enum):
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    UNKNOWN = "Unknown"


class VerdictSource(Enum):
    """判定依据"""
    CONTRACTING = "contracting"  # -1 <= q < 1
    UNIT_ROOT = "unit-root"  # q = 1, p < 2/3
    GAUSSIAN_UNIT_ROOT = "gaussian-unit-root"  # q = 1, p >= 2/3, 高斯
    DIAGNOSTIC = "diagnostic"
    VARIABLE_COEFFICIENTS = "variable-coefficients"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    source: VerdictSource
    reason: Optional[str] = None

    def __post_init__(self):
        if self.kind is VerdictKind.UNKNOWN and not self.reason:
            raise InvalidParameterError("an Unknown verdict must carry a reason")

    @classmethod
    def converges(cls, source: VerdictSource, reason: str = None) -> "Verdict":
        return cls(VerdictKind.CONVERGES, source, reason)

    @classmethod
    def diverges(cls, source: VerdictSource, reason: str = None) -> "Verdict":
        return cls(VerdictKind.DIVERGES, source, reason)

    @classmethod
    def unknown(cls, source: VerdictSource, reason: str) -> "Verdict":
        return cls(VerdictKind.UNKNOWN, source, reason)

    @property
    def is_definite(self) -> bool:
        return self.kind is not VerdictKind.UNKNOWN

    def __str__(self) -> str:
        if self.kind is VerdictKind.UNKNOWN:
            return f"Unknown({self.reason})"
        return self.kind.value


@dataclass(frozen=True)
class SeriesRow:
    n: int
    tail: TailEstimate
    term: float
    partial_sum: float


@dataclass
class SeriesTable:
    """级数表：各项、部分和、斜率与诊断判定"""
    params: SeriesParams
    rows: List[SeriesRow]
    slope: float
    verdict: Verdict

    @property
    def ns(self) -> np.ndarray:
        return np.array([row.n for row in self.rows])

    @property
    def terms(self) -> np.ndarray:
        return np.array([row.term for row in self.rows])

    @property
    def partial_sums(self) -> np.ndarray:
        return np.array([row.partial_sum for row in self.rows])

    def partial_sum_at(self, n: int) -> float:
        for row in self.rows:
            if row.n == n:
                return row.partial_sum
        raise InvalidParameterError(f"n={n} is not on the grid")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(row.n, row.tail.point, row.tail.ci_low, row.tail.ci_high, row.tail.method.value,
              row.term, row.partial_sum) for row in self.rows],
            columns=SERIES_COLUMNS)


@dataclass
class SensitivityReport:
    """中心表与两侧置信界对应的表"""
    central: SeriesTable
    pessimistic: SeriesTable
    optimistic: SeriesTable

    @property
    def verdicts(self) -> Tuple[Verdict, Verdict, Verdict]:
        return self.central.verdict, self.pessimistic.verdict, self.optimistic.verdict

    @property
    def stable(self) -> bool:
        """三张表的判定一致"""
        return len({v.kind for v in self.verdicts}) == 1


def series_kind(params: SeriesParams) -> str:
    """q=0 时对应的经典级数名称"""
    if math.isclose(params.r, 2 * params.p):
        return "Hsu-Robbins"
    if math.isclose(params.r, params.p):
        return "Spitzer"
    return "Baum-Katz"


def _exp(log_value: float) -> float:
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


def bk_term(n: int, params: SeriesParams, tail_value: float) -> float:
    """n^(r/p-2) · P{...}，在对数尺度上相乘，n^(r/p-2) 本身溢出时项仍可有限"""
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    if not 0.0 <= tail_value <= 1.0:
        raise InvalidParameterError(f"tail value must lie in [0, 1], got {tail_value}")
    if tail_value == 0.0:
        return 0.0
    return _exp(params.exponent * math.log(n) + math.log(tail_value))


# ---- 部分和 ----

def _log_power_integral(gamma: float, lo: float, hi: float) -> float:
    """log ∫_lo^hi x^gamma dx，0 < lo < hi"""
    a = gamma + 1.0
    if abs(a) < 1e-12:
        return math.log(math.log(hi / lo))
    if a > 0:
        return a * math.log(hi) + math.log(-math.expm1(a * math.log(lo / hi))) - math.log(a)
    return a * math.log(lo) + math.log(-math.expm1(a * math.log(hi / lo))) - math.log(-a)


def _unit_integral(gamma: float, u0: float) -> float:
    # ∫_u0^1 u^gamma du，gamma >= -1
    a = gamma + 1.0
    if abs(a) < 1e-12:
        return -math.log(u0)
    return -math.expm1(a * math.log(u0)) / a


def _sum_terms(exponent: float, m: np.ndarray, tails: np.ndarray) -> float:
    """Σ m^e T(m)，只对 T > 0 的点取对数"""
    positive = tails > 0
    if not np.any(positive):
        return 0.0
    log_terms = exponent * np.log(m[positive]) + np.log(np.minimum(tails[positive], 1.0))
    with np.errstate(over="ignore"):
        return float(np.sum(np.exp(log_terms)))


def _interior_sum(exponent: float, n_lo: int, t_lo: float, n_hi: int, t_hi: float) -> float:
    """Σ_{n_lo < m < n_hi} m^e T(m)，T 在两端之间按幂律插值（有零时线性）"""
    count = n_hi - n_lo - 1
    if count <= 0 or (t_lo == 0.0 and t_hi == 0.0):
        return 0.0
    power_law = t_lo > 0 and t_hi > 0
    beta = math.log(t_hi / t_lo) / math.log(n_hi / n_lo) if power_law else 0.0
    slope = (t_hi - t_lo) / (n_hi - n_lo)

    if count <= EXACT_GAP:
        m = np.arange(n_lo + 1, n_hi, dtype=float)
        if power_law:
            tails = np.exp(math.log(t_lo) + beta * (np.log(m) - math.log(n_lo)))
        else:
            tails = np.clip(t_lo + slope * (m - n_lo), 0.0, 1.0)
        return _sum_terms(exponent, m, tails)

    lo, hi = n_lo + 0.5, n_hi - 0.5
    if power_law:
        return _exp(math.log(t_lo) - beta * math.log(n_lo) + _log_power_integral(exponent + beta, lo, hi))
    # 一端为零：x = hi·u 换元后被积函数有界
    intercept = t_lo - slope * n_lo
    u0 = lo / hi
    inner = intercept * _unit_integral(exponent, u0) + slope * hi * _unit_integral(exponent + 1.0, u0)
    if inner <= 0:
        return 0.0
    return _exp((exponent + 1.0) * math.log(hi) + math.log(inner))


def _prefix_sum(exponent: float, n_first: int, t_first: float) -> float:
    """Σ_{m < n_1} m^e T(n_1)"""
    count = n_first - 1
    if count <= 0 or t_first == 0.0:
        return 0.0
    if count <= EXACT_GAP:
        m = np.arange(1, n_first, dtype=float)
        return _sum_terms(exponent, m, np.full(count, t_first))
    log_integral = _log_power_integral(exponent, 1.5, n_first - 0.5)
    return _exp(math.log(t_first) + float(np.logaddexp(0.0, log_integral)))


# ---- 诊断 ----

def _fit_slope(ns: Sequence[int], terms: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(terms, dtype=float)), 1)
    return float(slope)


def _accelerating_decay(ns: Sequence[int], tails: Sequence[float]) -> bool:
    """相邻点的 log-log 尾斜率全为负且严格递减"""
    log_n = np.log(np.asarray(ns, dtype=float))
    log_t = np.log(np.asarray(tails, dtype=float))
    local = np.diff(log_t) / np.diff(log_n)
    return bool(np.all(local < 0) and np.all(np.diff(local) < 0))


def diagnose(rows: Sequence[SeriesRow], tails: Sequence[float],
             diagnostics: DiagnosticsConfig = None) -> Tuple[float, Verdict]:
    """拟合窗口 [n_max / fit_decade, n_max] 上的经验判定

    Returns:
        (slope, verdict)，无法拟合时 slope 为 nan
    """
    cfg = diagnostics or ConfigManager.get_config().diagnostics
    source = VerdictSource.DIAGNOSTIC
    n_max = rows[-1].n
    window = [(row, t) for row, t in zip(rows, tails) if row.n >= n_max / cfg.fit_decade]
    if len(window) < cfg.min_fit_points:
        return math.nan, Verdict.unknown(source, "insufficient points")

    exact = all(row.tail.method.is_exact for row, _ in window)
    if exact and window[-1][0].term < cfg.domination_floor:
        return math.nan, Verdict.converges(source, "terms below the domination floor")

    positive = [(row, t) for row, t in window if 0 < row.term < math.inf]
    if len(positive) < cfg.min_fit_points:
        return math.nan, Verdict.unknown(source, "insufficient positive terms")

    ns = [row.n for row, _ in positive]
    slope = _fit_slope(ns, [row.term for row, _ in positive])
    if exact and _accelerating_decay(ns, [t for _, t in positive]):
        return slope, Verdict.converges(source, "accelerating tail decay")
    if slope < -1.0 - cfg.dead_band:
        return slope, Verdict.converges(source)
    if slope > -1.0 + cfg.dead_band:
        return slope, Verdict.diverges(source)
    return slope, Verdict.unknown(source, "slope within dead band")


def _accumulate(curve: Sequence[Tuple[int, TailEstimate]], params: SeriesParams,
                pick: Callable[[TailEstimate], float], diagnostics: DiagnosticsConfig = None) -> SeriesTable:
    if not curve:
        raise InvalidParameterError("tail curve is empty")
    ns = [int(n) for n, _ in curve]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidParameterError(f"curve n must be strictly increasing, got {ns}")

    exponent = params.exponent
    tails = [pick(estimate) for _, estimate in curve]
    rows: List[SeriesRow] = []
    running = _prefix_sum(exponent, ns[0], tails[0])
    for i, (n, estimate) in enumerate(curve):
        term = bk_term(n, params, tails[i])
        if i > 0:
            running += _interior_sum(exponent, ns[i - 1], tails[i - 1], n, tails[i])
        running += term
        rows.append(SeriesRow(n=n, tail=estimate, term=term, partial_sum=running))

    slope, verdict = diagnose(rows, tails, diagnostics)
    return SeriesTable(params=params, rows=rows, slope=slope, verdict=verdict)


def accumulate(curve: Sequence[Tuple[int, TailEstimate]], params: SeriesParams,
               diagnostics: DiagnosticsConfig = None, events: EventEmitter = None) -> SeriesTable:
    """由尾概率曲线累加级数并给出诊断判定"""
    table = _accumulate(curve, params, lambda e: e.point, diagnostics)
    logger.info("[SERIES] %s slope=%.4f verdict=%s", params.describe(), table.slope, table.verdict)
    emit_if(events, EventType.SERIES_ACCUMULATED,
            {"rows": len(table.rows), "slope": table.slope, "partial_sum": table.rows[-1].partial_sum}, "series")
    return table


def accumulate_with_sensitivity(curve: Sequence[Tuple[int, TailEstimate]], params: SeriesParams,
                                diagnostics: DiagnosticsConfig = None,
                                events: EventEmitter = None) -> SensitivityReport:
    """中心值、置信上界（悲观）、置信下界（乐观）三张表"""
    return SensitivityReport(
        central=accumulate(curve, params, diagnostics, events),
        pessimistic=_accumulate(curve, params, lambda e: e.ci_high, diagnostics),
        optimistic=_accumulate(curve, params, lambda e: e.ci_low, diagnostics),
    )


# ---- 理论判定 ----

def _moment_rule(spec: NoiseSpec, order: float, source: VerdictSource) -> Verdict:
    reason = f"E|theta|^{order:g} {'finite' if moment_finite(spec, order) else 'infinite'}"
    if moment_finite(spec, order):
        return Verdict.converges(source, reason)
    return Verdict.diverges(source, reason)


def predict(model: ModelSpec, params: SeriesParams, spec: NoiseSpec,
            events: EventEmitter = None) -> Verdict:
    """理论判定

    Raises:
        SideConditionError: r >= 1 而 E θ != 0
    """
    if params.r >= 1 and not is_mean_zero(spec):
        raise SideConditionError(f"r={params.r:g} >= 1 requires mean-zero noise, {spec.describe()} is not")

    if not model.is_constant:
        source = VerdictSource.VARIABLE_COEFFICIENTS
        if model.uniformly_contracting:
            verdict = _moment_rule(spec, params.r, source)
        else:
            verdict = Verdict.unknown(source, "coefficients are not uniformly bounded below 1 in modulus")
    elif model.q < 1:
        verdict = _moment_rule(spec, params.r, VerdictSource.CONTRACTING)
    elif params.p < UNIT_ROOT_P_LIMIT:
        verdict = _moment_rule(spec, params.r / (1.0 - params.p), VerdictSource.UNIT_ROOT)
    elif spec.family is NoiseFamily.NORMAL:
        verdict = Verdict.diverges(VerdictSource.GAUSSIAN_UNIT_ROOT,
                                   "unit root with p >= 2/3: Gaussian tails do not vanish")
    else:
        verdict = Verdict.unknown(VerdictSource.GAUSSIAN_UNIT_ROOT,
                                  "unit root with p >= 2/3 is settled only for Gaussian noise")
    emit_if(events, EventType.VERDICT, {"verdict": str(verdict), "source": verdict.source.value}, "series")
    return verdict


def concordance(diagnostic: Verdict, predicted: Verdict) -> str:
    """AGREE / DISAGREE / UNKNOWN 比较行"""
    if not diagnostic.is_definite:
        return f"UNKNOWN(diagnostic: {diagnostic.reason})"
    if not predicted.is_definite:
        return f"UNKNOWN(predicted: {predicted.reason})"
    if diagnostic.kind is predicted.kind:
        return f"AGREE({diagnostic.kind.value})"
    return f"DISAGREE(diagnostic={diagnostic.kind.value}, predicted={predicted.kind.value})"


# ---- 必要性下界 ----

def necessity_epsilon(q: float, epsilon: float) -> float:
    """ε_1：q >= 0 时为 ε，-1 < q < 0 时为 ε/(1+q)，q = -1 时为 ε"""
    if not -1 <= q < 1:
        raise InvalidParameterError(f"necessity bound needs -1 <= q < 1, got q={q}")
    if q >= 0 or q == -1:
        return epsilon
    return epsilon / (1.0 + q)


def _check_necessity_args(model: ModelSpec, spec: NoiseSpec):
    if not model.is_constant:
        raise InvalidParameterError("necessity bound needs a constant coefficient")
    if model.q == 1:
        raise InvalidParameterError("necessity bound is not defined for q=1")
    if not spec.is_symmetric:
        raise InvalidParameterError(f"necessity bound needs symmetric noise, got {spec.describe()}")


def necessity_lower_bound(model: ModelSpec, n: int, params: SeriesParams, spec: NoiseSpec) -> float:
    """n·P{|θ| > ε_1 n^(1/p)}；q = -1 时乘数为 ⌊(n+1)/2⌋"""
    _check_necessity_args(model, spec)
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    q = model.q
    multiplier = (n + 1) // 2 if q == -1 else n
    threshold = necessity_epsilon(q, params.epsilon) * n ** (1.0 / params.p)
    return multiplier * abs_tail(spec, threshold)


def necessity_envelope(model: ModelSpec, n: int, params: SeriesParams, spec: NoiseSpec) -> float:
    """Σ_k P{(1 - q^(n-k+1))|θ| > ε(1-q) n^(1/p)}，-1 < q < 1

    对同一 (q, n, p, ε) 不小于 necessity_lower_bound。
    """
    _check_necessity_args(model, spec)
    q = model.q
    if q == -1:
        raise InvalidParameterError("envelope is defined for -1 < q < 1")
    base = params.epsilon * (1.0 - q) * n ** (1.0 / params.p)
    total = []
    for m in range(1, n + 1):
        factor = 1.0 - q ** m
        total.append(abs_tail(spec, base / factor) if factor > 0 else 0.0)
    return math.fsum(total)
