#!/usr/bin/env python3
"""Baum-Katz Lab Model - 线性自回归序列

    ξ_1 = θ_1,  ξ_k = q_k ξ_{k-1} + θ_k,  S_n = Σ_{k≤n} ξ_k = Σ_{k≤n} a(n,k) θ_k

a(n,k) = 1 + Σ_{l=1}^{n-k} Π_{j=k+1}^{k+l} q_j，满足倒推关系
a(n,k) = 1 + q_{k+1}·a(n,k+1)，整行 O(n) 可得。
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidParameterError

# |1-q| 小于该值时闭式公式会发生灾难性抵消，改用 Horner 累加
NEAR_UNIT_ROOT = 1e-8


class PathMode(Enum):
    """部分和的计算方式"""
    RECURSIVE = "recursive"
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class ModelSpec:
    """自回归系数描述

    常系数：q 有值，sequence 为 None。
    变系数：sequence = (q_1, ..., q_max)，contraction_bound 为用户给出的 q̄。
    """
    q: Optional[float] = None
    sequence: Optional[Tuple[float, ...]] = None
    contraction_bound: Optional[float] = None

    def __post_init__(self):
        if (self.q is None) == (self.sequence is None):
            raise InvalidParameterError("ModelSpec needs exactly one of q or sequence")
        if self.q is not None:
            if not math.isfinite(self.q) or abs(self.q) > 1:
                raise InvalidParameterError(f"|q| must be at most 1, got q={self.q}")
        else:
            if len(self.sequence) == 0:
                raise InvalidParameterError("coefficient sequence is empty")
            for k, qk in enumerate(self.sequence, start=1):
                if not math.isfinite(qk) or abs(qk) > 1:
                    raise InvalidParameterError(f"|q_{k}| must be at most 1, got {qk}")
        if self.contraction_bound is not None and not (0 <= self.contraction_bound):
            raise InvalidParameterError(f"contraction bound must be non-negative, got {self.contraction_bound}")

    @classmethod
    def constant(cls, q: float) -> "ModelSpec":
        return cls(q=float(q))

    @classmethod
    def from_sequence(cls, coefficients: Sequence[float], bound: float = None) -> "ModelSpec":
        return cls(sequence=tuple(float(c) for c in coefficients),
                   contraction_bound=None if bound is None else float(bound))

    @property
    def is_constant(self) -> bool:
        return self.q is not None

    @property
    def max_index(self) -> Optional[int]:
        """变系数情形下可计算的最大 n"""
        return None if self.is_constant else len(self.sequence)

    @property
    def uniformly_contracting(self) -> bool:
        """sup_k |q_k| <= q̄ < 1"""
        if self.is_constant:
            return abs(self.q) < 1
        bound = self.contraction_bound
        if bound is None or bound >= 1:
            return False
        return max(abs(c) for c in self.sequence) <= bound

    def coefficient(self, k: int) -> float:
        """q_k（k 从 1 开始）"""
        if self.is_constant:
            return self.q
        if not 1 <= k <= len(self.sequence):
            raise InvalidParameterError(f"coefficient index {k} outside 1..{len(self.sequence)}")
        return self.sequence[k - 1]

    def key(self) -> tuple:
        """缓存键"""
        return ("q", self.q) if self.is_constant else ("seq", self.sequence)

    def describe(self) -> str:
        if self.is_constant:
            return f"q={self.q:g}"
        head = ",".join(f"{c:g}" for c in self.sequence[:4])
        more = ",..." if len(self.sequence) > 4 else ""
        return f"q_k=({head}{more}) len={len(self.sequence)}"

    def check_horizon(self, n: int):
        if not self.is_constant and n > len(self.sequence):
            raise InvalidParameterError(
                f"n={n} exceeds the coefficient sequence length {len(self.sequence)}")


@dataclass
class PathResult:
    """一条样本路径"""
    xi: np.ndarray
    partial_sums: np.ndarray
    n: int


def _check_finite(**values: float):
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidParameterError(f"{name} must be finite, got {value}")


def step_recursion(prev_xi: float, q_k: float, theta_k: float) -> float:
    """ξ_k = q_k ξ_{k-1} + θ_k；k=1 时调用方传 prev_xi=0"""
    _check_finite(prev_xi=prev_xi, q_k=q_k, theta_k=theta_k)
    return q_k * prev_xi + theta_k


def _geometric_sum(q: float, terms: int) -> float:
    # Σ_{l=0}^{terms-1} q^l
    total = 0.0
    for _ in range(terms):
        total = total * q + 1.0
    return total


def weight(n: int, k: int, model: ModelSpec) -> float:
    """三角权重 a(n,k)"""
    if n < 1 or k < 1:
        raise InvalidParameterError(f"n and k must be positive, got n={n}, k={k}")
    if not model.is_constant and k > len(model.sequence):
        raise InvalidParameterError(f"k={k} outside the coefficient sequence 1..{len(model.sequence)}")
    if n < k:
        return 0.0
    if n == k:
        return 1.0
    if model.is_constant:
        q = model.q
        terms = n - k + 1
        if q == 1.0:
            return float(terms)
        if abs(1.0 - q) < NEAR_UNIT_ROOT:
            return _geometric_sum(q, terms)
        return (1.0 - q ** terms) / (1.0 - q)
    model.check_horizon(n)
    # 增量扫描：running product / running sum
    total, product = 1.0, 1.0
    for j in range(k + 1, n + 1):
        product *= model.sequence[j - 1]
        total += product
    return total


def weight_row(n: int, model: ModelSpec) -> np.ndarray:
    """a(n,1..n)，下标 0 对应 k=1"""
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    model.check_horizon(n)
    if model.is_constant:
        q = model.q
        if q == 1.0:
            return np.arange(n, 0, -1, dtype=float)
        if q == 0.0:
            return np.ones(n)
        if abs(1.0 - q) >= NEAR_UNIT_ROOT:
            terms = np.arange(n, 0, -1, dtype=float)
            return (1.0 - q ** terms) / (1.0 - q)
    row = np.empty(n)
    row[n - 1] = 1.0
    for k in range(n - 1, 0, -1):
        row[k - 1] = 1.0 + model.coefficient(k + 1) * row[k]
    return row


def weight_sup(n: int, model: ModelSpec) -> float:
    """max_k |a(n,k)|"""
    return float(np.max(np.abs(weight_row(n, model))))


def _recursive_xi(model: ModelSpec, noise: np.ndarray) -> np.ndarray:
    if model.is_constant:
        # ξ_k - q ξ_{k-1} = θ_k，初值为零即 ξ_1 = θ_1
        return lfilter([1.0], [1.0, -model.q], noise)
    xi = np.empty_like(noise)
    prev = 0.0
    for idx, theta in enumerate(noise):
        q_k = model.coefficient(idx + 1) if idx > 0 else 0.0
        prev = q_k * prev + theta
        xi[idx] = prev
    return xi


def simulate_path(model: ModelSpec, noise: Sequence[float], mode: PathMode = PathMode.RECURSIVE) -> PathResult:
    """由给定噪声计算 ξ 与 S

    RECURSIVE 按递推 O(n)，WEIGHTED 按 S_m = Σ a(m,k) θ_k 逐行计算，两者数值一致。
    """
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 1 or noise.size == 0:
        raise InvalidParameterError("noise must be a non-empty one-dimensional sequence")
    if not np.all(np.isfinite(noise)):
        raise InvalidParameterError("noise contains non-finite values")
    n = noise.size
    model.check_horizon(n)

    xi = _recursive_xi(model, noise)
    if mode is PathMode.RECURSIVE:
        return PathResult(xi=xi, partial_sums=np.cumsum(xi), n=n)

    sums = np.empty(n)
    if model.is_constant:
        # 常系数时 a(m,k) 只依赖 m-k，第 m 行是全长行的尾部
        full = weight_row(n, model)
        for m in range(1, n + 1):
            sums[m - 1] = float(np.dot(full[n - m:], noise[:m]))
    else:
        for m in range(1, n + 1):
            sums[m - 1] = float(np.dot(weight_row(m, model), noise[:m]))
    return PathResult(xi=xi, partial_sums=sums, n=n)
