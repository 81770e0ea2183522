#!/usr/bin/env python3
"""Baum-Katz Lab - 线性自回归的 Baum-Katz 级数实验室

精确计算权重与部分和，估计或精确求出尾概率，经验判定级数收敛，
并与理论判定、概率不等式逐一核对。
"""

__version__ = "1.0.0"

from .config import get_config, create_config, setup_logging, LabConfig, ConfigManager
from .errors import LabError, InvalidParameterError, SideConditionError, EnumerationBudgetError, ConfigError
from .events import EventEmitter, EventType, Event
from .callbacks import LoggingEventHandler, CollectingEventHandler
from .streams import RandomStream
from .model import ModelSpec, PathMode, PathResult, step_recursion, weight, weight_row, weight_sup, simulate_path
from .distributions import NoiseSpec, NoiseFamily, parse_noise, abs_moment, moment_finite, tail_index, median
from .oracle import TailQuery, variance_of_sum, phi0, exact_gaussian_tail, enumerate_tail, enumerate_tail_exact
from .montecarlo import TailMethod, TailEstimate, wilson_interval, estimate_tail, estimate_tails, tail_curve
from .series import (SeriesParams, SeriesTable, Verdict, VerdictKind, VerdictSource, bk_term, accumulate,
                     accumulate_with_sensitivity, predict, necessity_lower_bound)
from .ineq import IneqReport, run_default_sweep
from .result_cache import EnumerationCache, create_enumeration_cache
from .presets import PresetLoader, get_presets_loader

__all__ = [
    "__version__",
    # Config
    "get_config", "create_config", "setup_logging", "LabConfig", "ConfigManager",
    # Errors
    "LabError", "InvalidParameterError", "SideConditionError", "EnumerationBudgetError", "ConfigError",
    # Events
    "EventEmitter", "EventType", "Event", "LoggingEventHandler", "CollectingEventHandler",
    # Model
    "RandomStream", "ModelSpec", "PathMode", "PathResult", "step_recursion", "weight", "weight_row",
    "weight_sup", "simulate_path",
    # Noise
    "NoiseSpec", "NoiseFamily", "parse_noise", "abs_moment", "moment_finite", "tail_index", "median",
    # Tails
    "TailQuery", "variance_of_sum", "phi0", "exact_gaussian_tail", "enumerate_tail", "enumerate_tail_exact",
    "TailMethod", "TailEstimate", "wilson_interval", "estimate_tail", "estimate_tails", "tail_curve",
    # Series
    "SeriesParams", "SeriesTable", "Verdict", "VerdictKind", "VerdictSource", "bk_term", "accumulate",
    "accumulate_with_sensitivity", "predict", "necessity_lower_bound",
    # Inequalities
    "IneqReport", "run_default_sweep",
    # Cache / presets
    "EnumerationCache", "create_enumeration_cache", "PresetLoader", "get_presets_loader",
]
