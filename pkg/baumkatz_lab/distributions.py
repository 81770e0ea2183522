#!/usr/bin/env python3
"""Baum-Katz Lab Distributions - 新息 θ 的分布族

各分布族用来实现矩条件的两侧：有限支撑（可精确枚举）、高斯（有精确尾概率）、
以及指定尾指数的对称重尾分布（SymmetricPareto、StudentT）。
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special, stats

from .errors import InvalidParameterError
from .streams import RandomStream

# 数值积分的相对精度
QUAD_RTOL = 1e-8


class NoiseFamily(Enum):
    """分布族"""
    NORMAL = "normal"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"
    SYMMETRIC_PARETO = "pareto"
    STUDENT_T = "student"
    SHIFTED_TWO_POINT = "twopoint"


@dataclass(frozen=True)
class NoiseSpec:
    """新息分布 F_θ

    只有与族相关的参数有意义，其余保持 None。
    """
    family: NoiseFamily
    sigma: Optional[float] = None
    half_width: Optional[float] = None
    alpha: Optional[float] = None
    scale: Optional[float] = None
    nu: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    prob_a: Optional[float] = None

    def __post_init__(self):
        fam = self.family
        if fam is NoiseFamily.NORMAL:
            _require_positive("sigma", self.sigma)
        elif fam is NoiseFamily.UNIFORM:
            _require_positive("half_width", self.half_width)
        elif fam is NoiseFamily.SYMMETRIC_PARETO:
            _require_positive("alpha", self.alpha)
            _require_positive("scale", self.scale)
        elif fam is NoiseFamily.STUDENT_T:
            _require_positive("nu", self.nu)
        elif fam is NoiseFamily.SHIFTED_TWO_POINT:
            for name in ("a", "b", "prob_a"):
                value = getattr(self, name)
                if value is None or not math.isfinite(value):
                    raise InvalidParameterError(f"{name} must be a finite number, got {value}")
            if not 0 < self.prob_a < 1:
                raise InvalidParameterError(f"prob_a must lie in (0, 1), got {self.prob_a}")

    # ---- 构造 ----

    @classmethod
    def normal(cls, sigma: float = 1.0) -> "NoiseSpec":
        return cls(NoiseFamily.NORMAL, sigma=float(sigma))

    @classmethod
    def rademacher(cls) -> "NoiseSpec":
        return cls(NoiseFamily.RADEMACHER)

    @classmethod
    def uniform(cls, half_width: float = 1.0) -> "NoiseSpec":
        return cls(NoiseFamily.UNIFORM, half_width=float(half_width))

    @classmethod
    def symmetric_pareto(cls, alpha: float, scale: float = 1.0) -> "NoiseSpec":
        return cls(NoiseFamily.SYMMETRIC_PARETO, alpha=float(alpha), scale=float(scale))

    @classmethod
    def student_t(cls, nu: float) -> "NoiseSpec":
        return cls(NoiseFamily.STUDENT_T, nu=float(nu))

    @classmethod
    def shifted_two_point(cls, a: float, b: float, prob_a: float) -> "NoiseSpec":
        return cls(NoiseFamily.SHIFTED_TWO_POINT, a=float(a), b=float(b), prob_a=float(prob_a))

    # ---- 性质 ----

    @property
    def is_symmetric(self) -> bool:
        return self.family is not NoiseFamily.SHIFTED_TWO_POINT

    @property
    def has_finite_support(self) -> bool:
        return self.family in (NoiseFamily.RADEMACHER, NoiseFamily.SHIFTED_TWO_POINT)

    def describe(self) -> str:
        fam = self.family
        if fam is NoiseFamily.NORMAL:
            return f"normal:{self.sigma:g}"
        if fam is NoiseFamily.RADEMACHER:
            return "rademacher"
        if fam is NoiseFamily.UNIFORM:
            return f"uniform:{self.half_width:g}"
        if fam is NoiseFamily.SYMMETRIC_PARETO:
            return f"pareto:{self.alpha:g},{self.scale:g}"
        if fam is NoiseFamily.STUDENT_T:
            return f"student:{self.nu:g}"
        return f"twopoint:{self.a:g},{self.b:g},{self.prob_a:.12g}"


class AbsMoment(NamedTuple):
    """E|θ|^s；numeric=True 表示由数值积分得到"""
    value: float
    numeric: bool = False

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def _require_positive(name: str, value: Optional[float]):
    if value is None or not math.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be a positive number, got {value}")


def parse_noise(text: str) -> NoiseSpec:
    """解析命令行写法，如 normal:1、pareto:1.5,1、twopoint:-1,2,0.6667"""
    name, _, args = text.strip().partition(":")
    name = name.strip().lower()
    try:
        values = [float(v) for v in args.split(",") if v.strip()] if args else []
    except ValueError:
        raise InvalidParameterError(f"cannot parse noise parameters in {text!r}")
    aliases = {"gauss": "normal", "gaussian": "normal", "t": "student", "studentt": "student",
               "symmetric_pareto": "pareto", "two_point": "twopoint", "shifted_two_point": "twopoint"}
    name = aliases.get(name, name)
    try:
        if name == "normal":
            return NoiseSpec.normal(*(values or [1.0]))
        if name == "rademacher" and not values:
            return NoiseSpec.rademacher()
        if name == "uniform":
            return NoiseSpec.uniform(*(values or [1.0]))
        if name == "pareto" and 1 <= len(values) <= 2:
            return NoiseSpec.symmetric_pareto(*values)
        if name == "student" and len(values) == 1:
            return NoiseSpec.student_t(values[0])
        if name == "twopoint" and len(values) == 3:
            return NoiseSpec.shifted_two_point(*values)
    except TypeError:
        pass
    raise InvalidParameterError(f"unknown noise specification {text!r}")


# ---- 矩与尾 ----

def tail_index(spec: NoiseSpec) -> float:
    """sup{s : E|θ|^s < ∞}"""
    if spec.family is NoiseFamily.SYMMETRIC_PARETO:
        return spec.alpha
    if spec.family is NoiseFamily.STUDENT_T:
        return spec.nu
    return math.inf


def mean(spec: NoiseSpec) -> float:
    """E θ（尾指数不超过 1 的对称分布取对称中心 0 作为约定）"""
    if spec.family is NoiseFamily.SHIFTED_TWO_POINT:
        return spec.prob_a * spec.a + (1 - spec.prob_a) * spec.b
    return 0.0


def is_mean_zero(spec: NoiseSpec, tol: float = 1e-12) -> bool:
    if spec.family is NoiseFamily.SHIFTED_TWO_POINT:
        scale = max(abs(spec.a), abs(spec.b))
        return abs(mean(spec)) <= tol * scale
    return True


def variance(spec: NoiseSpec) -> float:
    if not moment_finite(spec, 2):
        return math.inf
    m = mean(spec)
    return abs_moment(spec, 2).value - m * m


def moment_finite(spec: NoiseSpec, s: float) -> bool:
    """E|θ|^s < ∞ 当且仅当 s 严格小于尾指数"""
    if s <= 0:
        raise InvalidParameterError(f"moment order must be positive, got {s}")
    return s < tail_index(spec)


def _student_abs_moment(nu: float, s: float) -> float:
    density = stats.t(nu).pdf
    value, _ = integrate.quad(lambda x: x ** s * density(x), 0.0, np.inf,
                              epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
    return 2.0 * value


def abs_moment(spec: NoiseSpec, s: float) -> AbsMoment:
    """E|θ|^s，无穷时返回 inf"""
    if s <= 0:
        raise InvalidParameterError(f"moment order must be positive, got {s}")
    if not moment_finite(spec, s):
        return AbsMoment(math.inf)
    fam = spec.family
    if fam is NoiseFamily.NORMAL:
        value = spec.sigma ** s * 2 ** (s / 2) * special.gamma((s + 1) / 2) / math.sqrt(math.pi)
        return AbsMoment(float(value))
    if fam is NoiseFamily.RADEMACHER:
        return AbsMoment(1.0)
    if fam is NoiseFamily.UNIFORM:
        return AbsMoment(spec.half_width ** s / (s + 1))
    if fam is NoiseFamily.SYMMETRIC_PARETO:
        return AbsMoment(spec.alpha * spec.scale ** s / (spec.alpha - s))
    if fam is NoiseFamily.STUDENT_T:
        return AbsMoment(_student_abs_moment(spec.nu, s), numeric=True)
    return AbsMoment(spec.prob_a * abs(spec.a) ** s + (1 - spec.prob_a) * abs(spec.b) ** s)


def abs_tail(spec: NoiseSpec, x: float, strict: bool = True) -> float:
    """P{|θ| > x}（strict=False 时为 P{|θ| >= x}）"""
    if x < 0:
        return 1.0
    fam = spec.family
    if fam is NoiseFamily.NORMAL:
        return float(special.erfc(x / (spec.sigma * math.sqrt(2.0))))
    if fam is NoiseFamily.UNIFORM:
        return max(0.0, 1.0 - x / spec.half_width)
    if fam is NoiseFamily.STUDENT_T:
        return float(2.0 * stats.t.sf(x, spec.nu))
    if fam is NoiseFamily.SYMMETRIC_PARETO:
        if x < spec.scale:
            return 1.0
        return (spec.scale / x) ** spec.alpha
    values, probs = support(spec)
    hit = np.abs(values) > x if strict else np.abs(values) >= x
    return float(math.fsum(probs[hit]))


def support(spec: NoiseSpec) -> Tuple[np.ndarray, np.ndarray]:
    """有限支撑分布的 (取值, 概率)"""
    if spec.family is NoiseFamily.RADEMACHER:
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    if spec.family is NoiseFamily.SHIFTED_TWO_POINT:
        return np.array([spec.a, spec.b]), np.array([spec.prob_a, 1.0 - spec.prob_a])
    raise InvalidParameterError(f"{spec.describe()} has no finite support")


def median(spec: NoiseSpec) -> float:
    """规范中位数：满足 F(m) >= 1/2 的最小 m"""
    if spec.is_symmetric:
        return 0.0
    values, probs = support(spec)
    order = np.argsort(values)
    cumulative = 0.0
    for idx in order:
        cumulative += probs[idx]
        if cumulative >= 0.5:
            return float(values[idx])
    return float(values[order[-1]])


# ---- 抽样 ----

def sample_array(spec: NoiseSpec, rng: np.random.Generator, size: Union[int, Tuple[int, ...]]) -> np.ndarray:
    """向量化抽样"""
    fam = spec.family
    if fam is NoiseFamily.NORMAL:
        return rng.normal(0.0, spec.sigma, size)
    if fam is NoiseFamily.RADEMACHER:
        return rng.integers(0, 2, size).astype(float) * 2.0 - 1.0
    if fam is NoiseFamily.UNIFORM:
        return rng.uniform(-spec.half_width, spec.half_width, size)
    if fam is NoiseFamily.SYMMETRIC_PARETO:
        # numpy 的 pareto 是 Lomax，平移 1 后乘 scale 得到经典 Pareto
        magnitude = spec.scale * (1.0 + rng.pareto(spec.alpha, size))
        signs = rng.integers(0, 2, size) * 2 - 1
        return magnitude * signs
    if fam is NoiseFamily.STUDENT_T:
        return rng.standard_t(spec.nu, size)
    return np.where(rng.random(size) < spec.prob_a, spec.a, spec.b)


def sample(spec: NoiseSpec, stream: RandomStream) -> float:
    """从 F_θ 抽取一个样本"""
    return float(sample_array(spec, stream.generator, 1)[0])


def symmetrize(spec: NoiseSpec, stream: RandomStream) -> float:
    """θ - θ'，θ' 为独立同分布副本"""
    pair = sample_array(spec, stream.generator, 2)
    return float(pair[0] - pair[1])


def symmetrized_array(spec: NoiseSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    return sample_array(spec, rng, size) - sample_array(spec, rng, size)
