#!/usr/bin/env python3
"""Baum-Katz Lab Experiment - 实验配置与编排

配置来源按优先级从低到高：内置默认值、预置、配置文件、命令行参数。
每个键记住自己的来源（file:line 或 --flag），校验失败时据此报错。

输出为 CSV：# 开头的元数据前言、一行表头、数据行，必要时 # 开头的结论行。
同样的配置与种子得到逐字节相同的输出，前言不含线程数和时间。
"""

import io
import logging
import math
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import ConfigManager
from .distributions import NoiseFamily, NoiseSpec, parse_noise, sample_array
from .errors import ConfigError, InvalidParameterError, LabError
from .events import EventEmitter, EventType
from .ineq import run_default_sweep
from .model import ModelSpec, PathMode, simulate_path
from .montecarlo import TailMethod, tail_curve
from .oracle import TailQuery, exact_gaussian_tail, gaussian_unit_root_limit, variance_of_sum
from .presets import Preset, read_flat_yaml
from .series import (SeriesParams, VerdictKind, accumulate_with_sensitivity, concordance, predict,
                     series_kind)
from .streams import RandomStream

logger = logging.getLogger("baumkatz_lab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DISAGREE = 3
EXIT_VIOLATION = 4

DEFAULTS: Dict[str, Any] = {
    "q": 0.0,
    "p": 1.0,
    "r": 2.0,
    "eps": 1.0,
    "noise": "normal:1",
    "n_grid": "2^4..2^12",
    "seed": 1,
    "mode": "recursive",
}

KNOWN_KEYS = {"q", "q_seq", "q_bound", "p", "r", "eps", "noise", "n_grid", "reps", "seed",
              "confidence", "out", "mode", "workers"}
# 不写入前言，保证不同线程数的输出一致
NOT_ECHOED = {"out", "workers"}

_POWER = re.compile(r"^\s*(\d+)\s*\^\s*(\d+)\s*$")


@dataclass
class ExperimentConfig:
    """一次实验的完整配置"""
    model: ModelSpec
    noise: NoiseSpec
    series: SeriesParams
    n_grid: List[int]
    replications: int
    seed: int
    confidence: float
    output_path: Optional[str] = None
    workers: Optional[int] = None
    mode: PathMode = PathMode.RECURSIVE
    echo: Dict[str, Any] = field(default_factory=dict)
    locations: Dict[str, str] = field(default_factory=dict)

    def where(self, key: str) -> str:
        return self.locations.get(key, "default")


@dataclass
class ExperimentResult:
    """一个子命令的产出"""
    frame: pd.DataFrame
    preamble: List[str] = field(default_factory=list)
    trailer: List[str] = field(default_factory=list)
    exit_code: int = EXIT_OK


# ---- 解析 ----

def _parse_count(text: str) -> Tuple[int, Optional[int]]:
    """'2^4' -> (16, 2)；'100' -> (100, None)"""
    match = _POWER.match(text)
    if match:
        base, exp = int(match.group(1)), int(match.group(2))
        return base ** exp, base
    value = float(text)
    if value != int(value):
        raise InvalidParameterError(f"{text!r} is not an integer")
    return int(value), None


def parse_n_grid(value: Any) -> List[int]:
    """n 网格：列表、'16,32,64'、'2^4..2^17'（按底数成倍）或 '1..20'（连续）"""
    if isinstance(value, (list, tuple)):
        items = [str(v) for v in value]
    else:
        items = [s for s in str(value).split(",") if s.strip()]
    grid: List[int] = []
    try:
        for item in items:
            if ".." in item:
                lo_text, hi_text = item.split("..", 1)
                lo, lo_base = _parse_count(lo_text)
                hi, hi_base = _parse_count(hi_text)
                if lo_base is not None and lo_base == hi_base and lo_base > 1:
                    n = lo
                    while n <= hi:
                        grid.append(n)
                        n *= lo_base
                else:
                    grid.extend(range(lo, hi + 1))
            else:
                grid.append(_parse_count(item)[0])
    except ValueError:
        raise InvalidParameterError(f"cannot parse n grid {value!r}")
    if not grid:
        raise InvalidParameterError("n grid is empty")
    if grid[0] < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError(f"n grid must be positive and strictly increasing, got {grid}")
    return grid


def parse_coefficients(value: Any) -> List[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v.strip()]


class ConfigSources:
    """按优先级合并的配置值及其来源"""

    def __init__(self):
        self.values: Dict[str, Any] = dict(DEFAULTS)
        self.locations: Dict[str, str] = {k: "default" for k in DEFAULTS}

    def update(self, values: Dict[str, Any], locations: Dict[str, str]):
        for key, value in values.items():
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown key {key!r}", locations.get(key))
            self.values[key] = value
            self.locations[key] = locations.get(key, "default")
        # q 与 q_seq 互斥，后出现的覆盖前者
        if "q_seq" in values and "q" not in values:
            self.values.pop("q", None)
        elif "q" in values and "q_seq" not in values:
            self.values.pop("q_seq", None)

    def add_preset(self, preset: Preset):
        self.update(preset.values, preset.locations)

    def add_file(self, path: str):
        values, locations = read_flat_yaml(Path(path))
        self.update(values, locations)

    def add_flags(self, flags: Dict[str, Any]):
        values = {k: v for k, v in flags.items() if v is not None}
        self.update(values, {k: "--" + k.replace("_", "-") for k in values})

    def where(self, key: str) -> str:
        return self.locations.get(key, "default")


def _field(sources: ConfigSources, key: str, build):
    """取值并构造，失败时附上来源"""
    try:
        return build(sources.values[key])
    except (InvalidParameterError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid {key}: {e}", sources.where(key))


def build_experiment(sources: ConfigSources) -> ExperimentConfig:
    """由合并后的配置构造 ExperimentConfig"""
    lab = ConfigManager.get_config()
    values = sources.values

    if "q_seq" in values:
        coefficients = _field(sources, "q_seq", parse_coefficients)
        bound = _field(sources, "q_bound", float) if "q_bound" in values else None
        model = _field(sources, "q_seq", lambda _: ModelSpec.from_sequence(coefficients, bound))
    else:
        model = _field(sources, "q", lambda v: ModelSpec.constant(float(v)))
    noise = _field(sources, "noise", lambda v: parse_noise(str(v)))

    p = _field(sources, "p", float)
    r = _field(sources, "r", float)
    eps = _field(sources, "eps", float)
    if not 0 < p < 2:
        raise ConfigError(f"p must lie in (0, 2), got {p}", sources.where("p"))
    if not (math.isfinite(r) and r >= p):
        raise ConfigError(f"r must satisfy r >= p, got r={r}, p={p}", sources.where("r"))
    if not (math.isfinite(eps) and eps > 0):
        raise ConfigError(f"eps must be positive, got {eps}", sources.where("eps"))
    params = SeriesParams(p=p, r=r, epsilon=eps)

    n_grid = _field(sources, "n_grid", parse_n_grid)
    if model.max_index is not None and n_grid[-1] > model.max_index:
        raise ConfigError(f"n grid reaches {n_grid[-1]} but only {model.max_index} coefficients are given",
                          sources.where("n_grid"))

    replications = _field(sources, "reps", int) if "reps" in values else lab.simulation.default_replications
    if replications < lab.simulation.min_replications:
        raise ConfigError(f"reps must be at least {lab.simulation.min_replications}", sources.where("reps"))
    seed = _field(sources, "seed", int)
    if seed < 0:
        raise ConfigError("seed must be non-negative", sources.where("seed"))
    confidence = _field(sources, "confidence", float) if "confidence" in values else lab.simulation.confidence
    if not 0 < confidence < 1:
        raise ConfigError("confidence must lie in (0, 1)", sources.where("confidence"))
    workers = _field(sources, "workers", int) if "workers" in values else None
    mode = _field(sources, "mode", lambda v: PathMode(str(v).lower()))

    echo = {k: v for k, v in sorted(values.items()) if k not in NOT_ECHOED}
    echo.update({"reps": replications, "confidence": confidence})
    return ExperimentConfig(model=model, noise=noise, series=params, n_grid=n_grid,
                            replications=replications, seed=seed, confidence=confidence,
                            output_path=values.get("out"), workers=workers, mode=mode, echo=echo,
                            locations=dict(sources.locations))


# ---- 输出 ----

def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.12g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def make_preamble(command: str, config: Optional[ExperimentConfig]) -> List[str]:
    lab = ConfigManager.get_config()
    lines = [f"baumkatz_lab {lab.version}", f"command={command}"]
    if config is not None:
        lines.append("config " + " ".join(f"{k}={_format_value(v)}" for k, v in sorted(config.echo.items())))
        lines.append(f"seed={config.seed}")
    return lines


def render_csv(result: ExperimentResult) -> str:
    buffer = io.StringIO()
    for line in result.preamble:
        buffer.write(f"# {line}\n")
    result.frame.to_csv(buffer, index=False, float_format="%.12g", lineterminator="\n")
    for line in result.trailer:
        buffer.write(f"# {line}\n")
    return buffer.getvalue()


def write_result(result: ExperimentResult, output_path: Optional[str] = None):
    """写入文件；路径为空或 '-' 时写到 stdout"""
    text = render_csv(result)
    if not output_path or output_path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("[EXPERIMENT] wrote %s", path)


# ---- 子命令 ----

def run_simulate(config: ExperimentConfig, events: EventEmitter = None) -> ExperimentResult:
    """一条样本路径，长度取网格最大值"""
    n = config.n_grid[-1]
    stream = RandomStream(config.seed, (0,))
    noise = sample_array(config.noise, stream.generator, n)
    path = simulate_path(config.model, noise, config.mode)
    frame = pd.DataFrame({"k": np.arange(1, n + 1), "theta": noise, "xi": path.xi,
                          "partial_sum": path.partial_sums})
    return ExperimentResult(frame, make_preamble("simulate", config))


def run_tail(config: ExperimentConfig, events: EventEmitter = None) -> ExperimentResult:
    curve = tail_curve(config.model, config.noise, config.series, config.n_grid, config.replications,
                       config.seed, config.confidence, config.workers, events)
    params = config.series
    frame = pd.DataFrame(
        [(n, params.epsilon * n ** (1.0 / params.p), e.point, e.ci_low, e.ci_high, e.method.value,
          e.replications, e.hits) for n, e in curve],
        columns=["n", "threshold", "tail", "ci_low", "ci_high", "method", "replications", "hits"])
    return ExperimentResult(frame, make_preamble("tail", config))


def run_series(config: ExperimentConfig, events: EventEmitter = None) -> ExperimentResult:
    """级数表、理论判定与比较行

    全部尾概率来自精确方法而判定不一致时退出码为 EXIT_DISAGREE。
    """
    curve = tail_curve(config.model, config.noise, config.series, config.n_grid, config.replications,
                       config.seed, config.confidence, config.workers, events)
    report = accumulate_with_sensitivity(curve, config.series, events=events)
    table = report.central
    predicted = predict(config.model, config.series, config.noise, events)
    comparison = concordance(table.verdict, predicted)

    trailer = [
        f"kind={series_kind(config.series)}",
        f"slope={_format_value(table.slope)}",
        f"diagnostic={table.verdict}",
        f"predicted={predicted} source={predicted.source.value}"
        + (f" reason={predicted.reason}" if predicted.reason else ""),
        f"sensitivity pessimistic={report.pessimistic.verdict} optimistic={report.optimistic.verdict}",
        f"comparison={comparison}",
    ]
    exit_code = EXIT_OK
    oracle_backed = all(row.tail.method.is_exact for row in table.rows)
    if comparison.startswith("DISAGREE") and oracle_backed:
        logger.error("[EXPERIMENT] %s on an exact tail curve", comparison)
        exit_code = EXIT_DISAGREE
    return ExperimentResult(table.to_frame(), make_preamble("series", config), trailer, exit_code)


def run_predict(config: ExperimentConfig, events: EventEmitter = None) -> ExperimentResult:
    verdict = predict(config.model, config.series, config.noise, events)
    label = "UNKNOWN" if verdict.kind is VerdictKind.UNKNOWN else verdict.kind.value
    frame = pd.DataFrame([(label, verdict.source.value, verdict.reason or "", series_kind(config.series))],
                         columns=["verdict", "source", "reason", "kind"])
    return ExperimentResult(frame, make_preamble("predict", config))


def _unit_root_config(config: ExperimentConfig) -> ExperimentConfig:
    """检查噪声与系数，返回按 q = 1 回显的配置"""
    if config.noise.family is not NoiseFamily.NORMAL:
        raise ConfigError(f"unit-root-gaussian needs normal noise, got {config.noise.describe()}",
                          config.where("noise"))
    if not config.model.is_constant:
        raise ConfigError("unit-root-gaussian takes no coefficient sequence", config.where("q_seq"))
    if config.model.q != 1.0 and config.where("q") != "default":
        raise ConfigError(f"unit-root-gaussian fixes q=1, got q={config.model.q:g}", config.where("q"))
    return replace(config, model=ModelSpec.constant(1.0), echo={**config.echo, "q": 1.0})


def run_unit_root_gaussian(config: ExperimentConfig, events: EventEmitter = None) -> ExperimentResult:
    """q = 1、高斯噪声下的精确尾概率；p = 2/3 时附极限值"""
    config = _unit_root_config(config)
    sigma = config.noise.sigma
    model = config.model
    params = config.series
    method = TailMethod.EXACT_GAUSSIAN.value
    rows = []
    for n in config.n_grid:
        query = TailQuery(n=n, p=params.p, epsilon=params.epsilon)
        rows.append((n, query.threshold, variance_of_sum(model, n, sigma),
                     exact_gaussian_tail(model, query, sigma), method))
    frame = pd.DataFrame(rows, columns=["n", "threshold", "variance", "tail", "method"])
    trailer = []
    if math.isclose(params.p, 2.0 / 3.0, rel_tol=1e-9):
        trailer.append(f"limit={_format_value(gaussian_unit_root_limit(params.epsilon / sigma))}")
    tails = frame["tail"].to_numpy()
    trailer.append(f"tail_monotone_increasing={bool(np.all(np.diff(tails) > 0))}")
    return ExperimentResult(frame, make_preamble("unit-root-gaussian", config), trailer)


def run_check_inequalities(config: Optional[ExperimentConfig] = None,
                           events: EventEmitter = None) -> ExperimentResult:
    reports = run_default_sweep(events=events)
    frame = pd.DataFrame(
        [(r.name, r.instances_checked, r.violations, r.flagged, r.worst_margin, r.method.value)
         for r in reports],
        columns=["name", "instances", "violations", "flagged", "worst_margin", "method"])
    total = sum(r.violations for r in reports)
    exit_code = EXIT_VIOLATION if total else EXIT_OK
    return ExperimentResult(frame, make_preamble("check-inequalities", None),
                            [f"violations={total}"], exit_code)


COMMANDS = {
    "simulate": run_simulate,
    "tail": run_tail,
    "series": run_series,
    "predict": run_predict,
    "unit-root-gaussian": run_unit_root_gaussian,
    "check-inequalities": run_check_inequalities,
}
ALIASES = {"example1": "unit-root-gaussian"}


def run(command: str, config: Optional[ExperimentConfig], events: EventEmitter = None) -> ExperimentResult:
    """执行一个子命令"""
    command = ALIASES.get(command, command)
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if events is not None:
        events.emit(EventType.EXPERIMENT_START, {"command": command}, "experiment")
    try:
        result = COMMANDS[command](config, events)
    except LabError as e:
        if events is not None:
            events.emit(EventType.ERROR, {"command": command, "error": str(e)}, "experiment")
        raise
    if events is not None:
        events.emit(EventType.EXPERIMENT_STOP, {"command": command, "exit_code": result.exit_code}, "experiment")
    return result
