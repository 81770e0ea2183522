#!/usr/bin/env python3
"""Baum-Katz Lab Monte Carlo - 尾概率估计

P{|S_n| > ε n^(1/p)} 的重复模拟估计，附 Wilson 置信区间。

分块规则只取决于 n 与配置：每块 max(1, min(max_block_rows, block_cells // n)) 行，
第 b 块使用随机流 (seed, n, b)。各块按顺序拼接，结果与线程数无关。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np
from scipy import stats

from .config import ConfigManager
from .distributions import NoiseFamily, NoiseSpec, sample_array
from .errors import EnumerationBudgetError, InvalidParameterError
from .events import EventEmitter, EventType, emit_if
from .model import ModelSpec, weight_row
from .oracle import TailQuery, can_enumerate, enumerate_tail, exact_gaussian_tail
from .result_cache import EnumerationCache
from .streams import RandomStream

logger = logging.getLogger("baumkatz_lab")


class TailMethod(Enum):
    """尾概率来源，值即 CSV 中的方法标签"""
    MONTE_CARLO = "MonteCarlo"
    EXACT_GAUSSIAN = "ExactGaussian"
    ENUMERATED = "Enumerated"

    @property
    def is_exact(self) -> bool:
        return self is not TailMethod.MONTE_CARLO


@dataclass(frozen=True)
class TailEstimate:
    """尾概率估计

    精确方法的 replications 与 hits 均为 0，区间退化为点。
    """
    point: float
    ci_low: float
    ci_high: float
    replications: int
    hits: int
    method: TailMethod
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.ci_low <= self.point <= self.ci_high <= 1.0:
            raise InvalidParameterError(
                f"inconsistent estimate: {self.ci_low} <= {self.point} <= {self.ci_high} violated")

    @classmethod
    def exact(cls, value: float, method: TailMethod, confidence: float = 1.0) -> "TailEstimate":
        value = min(1.0, max(0.0, float(value)))
        return cls(point=value, ci_low=value, ci_high=value, replications=0, hits=0,
                   method=method, confidence=confidence)


def wilson_interval(hits: int, trials: int, confidence: float = 0.99) -> Tuple[float, float]:
    """二项比例的 Wilson score 区间

    Returns:
        (lower, upper)，截断到 [0, 1] 并保证包含 hits/trials
    """
    if trials <= 0:
        raise InvalidParameterError(f"trials must be positive, got {trials}")
    if not 0 <= hits <= trials:
        raise InvalidParameterError(f"hits must lie in 0..{trials}, got {hits}")
    if not 0 < confidence < 1:
        raise InvalidParameterError(f"confidence must lie in (0, 1), got {confidence}")

    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    p_hat = hits / trials
    denominator = 1 + z ** 2 / trials
    center = (p_hat + z ** 2 / (2 * trials)) / denominator
    margin = (z / denominator) * math.sqrt(p_hat * (1 - p_hat) / trials + z ** 2 / (4 * trials ** 2))

    lower = max(0.0, min(center - margin, p_hat))
    upper = min(1.0, max(center + margin, p_hat))
    return lower, upper


def block_layout(n: int, replications: int) -> List[int]:
    """每块的行数；只依赖 n、重复次数和配置"""
    cfg = ConfigManager.get_config().simulation
    rows = max(1, min(cfg.max_block_rows, cfg.block_cells // n))
    full, rest = divmod(replications, rows)
    return [rows] * full + ([rest] if rest else [])


def simulate_sums(model: ModelSpec, spec: NoiseSpec, n: int, replications: int, seed: int,
                  workers: int = None, events: EventEmitter = None) -> np.ndarray:
    """模拟 replications 个独立的 S_n

    Returns:
        长度为 replications 的数组，顺序固定
    """
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    if replications < 1:
        raise InvalidParameterError(f"replications must be positive, got {replications}")
    row = weight_row(n, model)
    layout = block_layout(n, replications)
    root = RandomStream.from_seed(seed)
    workers = workers or ConfigManager.get_config().simulation.workers

    def run_block(index: int) -> np.ndarray:
        stream = root.split(n, index)
        noise = sample_array(spec, stream.generator, (layout[index], n))
        sums = noise @ row
        emit_if(events, EventType.BLOCK_DONE, {"n": n, "block": index, "rows": layout[index]}, "montecarlo")
        return sums

    if workers <= 1 or len(layout) == 1:
        blocks = [run_block(i) for i in range(len(layout))]
    else:
        # map 保持输入顺序
        with ThreadPoolExecutor(max_workers=workers) as executor:
            blocks = list(executor.map(run_block, range(len(layout))))
    return np.concatenate(blocks)


def _check_replications(replications: int):
    minimum = ConfigManager.get_config().simulation.min_replications
    if replications < minimum:
        raise InvalidParameterError(
            f"replications must be at least {minimum} for a meaningful interval, got {replications}")


def estimate_tails(model: ModelSpec, spec: NoiseSpec, n: int, thresholds: Sequence[float],
                   replications: int, seed: int, confidence: float = None,
                   workers: int = None, events: EventEmitter = None) -> List[TailEstimate]:
    """同一组样本上评估多个阈值（公共随机数）"""
    _check_replications(replications)
    confidence = confidence if confidence is not None else ConfigManager.get_config().simulation.confidence
    magnitude = np.abs(simulate_sums(model, spec, n, replications, seed, workers, events))
    estimates = []
    for threshold in thresholds:
        hits = int(np.count_nonzero(magnitude > threshold))
        low, high = wilson_interval(hits, replications, confidence)
        estimates.append(TailEstimate(point=hits / replications, ci_low=low, ci_high=high,
                                      replications=replications, hits=hits,
                                      method=TailMethod.MONTE_CARLO, confidence=confidence))
    return estimates


def estimate_tail(model: ModelSpec, spec: NoiseSpec, query: TailQuery, replications: int, seed: int,
                  confidence: float = None, workers: int = None,
                  events: EventEmitter = None) -> TailEstimate:
    """P{|S_n| > threshold} 的 Monte Carlo 估计"""
    return estimate_tails(model, spec, query.n, [query.threshold], replications, seed,
                          confidence, workers, events)[0]


def choose_method(model: ModelSpec, spec: NoiseSpec, n: int) -> TailMethod:
    """分派规则：高斯常系数用精确公式，有限支撑且在预算内用枚举，其余模拟"""
    if spec.family is NoiseFamily.NORMAL and model.is_constant:
        return TailMethod.EXACT_GAUSSIAN
    if spec.has_finite_support and can_enumerate(spec, n):
        return TailMethod.ENUMERATED
    return TailMethod.MONTE_CARLO


def tail_curve(model: ModelSpec, spec: NoiseSpec, params, n_grid: Sequence[int], replications: int,
               seed: int, confidence: float = None, workers: int = None,
               events: EventEmitter = None, cache: EnumerationCache = None) -> List[Tuple[int, TailEstimate]]:
    """在 n 网格上逐点求尾概率

    Args:
        params: 提供 p 与 epsilon 的级数参数
    """
    grid = [int(n) for n in n_grid]
    if not grid:
        raise InvalidParameterError("n_grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError(f"n_grid must be strictly increasing, got {grid}")
    confidence = confidence if confidence is not None else ConfigManager.get_config().simulation.confidence

    curve = []
    for n in grid:
        query = TailQuery(n=n, p=params.p, epsilon=params.epsilon)
        method = choose_method(model, spec, n)
        if method is TailMethod.EXACT_GAUSSIAN:
            estimate = TailEstimate.exact(exact_gaussian_tail(model, query, spec.sigma), method, confidence)
        elif method is TailMethod.ENUMERATED:
            try:
                estimate = TailEstimate.exact(enumerate_tail(model, spec, query, cache=cache), method, confidence)
            except EnumerationBudgetError as e:
                logger.warning("[MONTECARLO] %s; falling back to simulation", e)
                emit_if(events, EventType.WARNING, {"n": n, "reason": str(e)}, "montecarlo")
                estimate = estimate_tail(model, spec, query, replications, seed, confidence, workers, events)
        else:
            estimate = estimate_tail(model, spec, query, replications, seed, confidence, workers, events)
        logger.debug("[MONTECARLO] n=%d tail=%.6g method=%s", n, estimate.point, estimate.method.value)
        emit_if(events, EventType.TAIL_ESTIMATED,
                {"n": n, "tail": estimate.point, "method": estimate.method.value}, "montecarlo")
        curve.append((n, estimate))
    return curve
