#!/usr/bin/env python3
"""Baum-Katz Lab Configuration"""

import os
import json
import logging
import yaml
from pathlib import Path
from typing import Any, Dict, Optional
from dataclasses import dataclass, field

logger = logging.getLogger("baumkatz_lab")


@dataclass
class SimulationConfig:
    """Monte Carlo 配置"""
    workers: int = 1  # 默认线程数，环境变量 BKLAB_THREADS
    block_cells: int = 1 << 22  # 单个块内噪声矩阵的最大元素数
    max_block_rows: int = 65536
    default_replications: int = 100_000
    confidence: float = 0.99
    min_replications: int = 100


@dataclass
class EnumerationConfig:
    """精确枚举配置"""
    max_outcomes: int = 1 << 24
    cache_size: int = 64


@dataclass
class DiagnosticsConfig:
    """级数诊断配置"""
    dead_band: float = 0.15
    domination_floor: float = 1e-300
    fit_decade: float = 10.0
    min_fit_points: int = 4


@dataclass
class InequalityConfig:
    """不等式校验配置"""
    mc_draws: int = 1_000_000
    atom_offset: float = 1e-9
    seed: int = 20240101
    tolerance: float = 1e-12
    power_mean_tuples: int = 10_000


@dataclass
class LoggingConfig:
    """日志配置"""
    level: str = "INFO"
    file_path: Optional[str] = None


@dataclass
class LabConfig:
    """实验室主配置"""
    version: str = "1.0.0"
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    enumeration: EnumerationConfig = field(default_factory=EnumerationConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    inequalities: InequalityConfig = field(default_factory=InequalityConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    presets_dir: str = "./presets"


class ConfigManager:
    _instance: Optional['ConfigManager'] = None
    _config: Optional[LabConfig] = None
    _config_dir: Optional[Path] = None  # 配置文件所在目录

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if self._config is None:
            self._config = LabConfig()

    @classmethod
    def get_instance(cls) -> 'ConfigManager':
        return cls() if cls._instance is None else cls._instance

    @classmethod
    def get_config(cls) -> LabConfig:
        return cls.get_instance()._config

    @classmethod
    def get_config_dir(cls) -> Optional[Path]:
        """获取配置文件所在目录"""
        return cls._config_dir

    @classmethod
    def reset(cls):
        """恢复默认配置（测试用）"""
        manager = cls.get_instance()
        manager._config = LabConfig()
        cls._config_dir = None

    def load_from_file(self, config_path: str) -> bool:
        path = Path(config_path)
        if not path.exists():
            return False
        try:
            ConfigManager._config_dir = path.parent.resolve()
            content = path.read_text(encoding="utf-8")
            if path.suffix in [".yaml", ".yml"]:
                config_dict = yaml.safe_load(content) or {}
            else:
                config_dict = json.loads(content)
            self._apply_dict(config_dict)
            self._resolve_relative_paths()
            return True
        except Exception as e:
            logger.warning("[ConfigManager] Failed to load config %s: %s", config_path, e)
            return False

    def _resolve_relative_paths(self):
        """将相对路径转换为相对于配置文件目录的绝对路径"""
        config_dir = ConfigManager._config_dir
        if config_dir is None:
            return
        if self._config.presets_dir:
            self._config.presets_dir = self._resolve_path(self._config.presets_dir, config_dir)
        if self._config.logging.file_path:
            self._config.logging.file_path = self._resolve_path(self._config.logging.file_path, config_dir)

    def _resolve_path(self, path: str, base_dir: Path) -> str:
        """解析路径，如果是相对路径则相对于 base_dir"""
        p = Path(path)
        return str((base_dir / p).resolve()) if not p.is_absolute() else str(p.resolve())

    def load_from_env(self, prefix: str = "BKLAB_") -> int:
        mappings = {
            f"{prefix}THREADS": ("simulation", "workers", int),
            f"{prefix}BLOCK_CELLS": ("simulation", "block_cells", int),
            f"{prefix}CONFIDENCE": ("simulation", "confidence", float),
            f"{prefix}MAX_OUTCOMES": ("enumeration", "max_outcomes", int),
            f"{prefix}DEAD_BAND": ("diagnostics", "dead_band", float),
            f"{prefix}MC_DRAWS": ("inequalities", "mc_draws", int),
            f"{prefix}LOGGING_LEVEL": ("logging", "level", str),
            f"{prefix}PRESETS_DIR": ("presets_dir", None, str),
        }
        count = 0
        for env_key, (section, key, cast) in mappings.items():
            value = os.environ.get(env_key)
            if value is None:
                continue
            try:
                self._set_nested_value(section, key, cast(value))
                count += 1
            except ValueError:
                logger.warning("[ConfigManager] Ignoring %s=%r", env_key, value)
        return count

    def _apply_dict(self, config_dict: Dict[str, Any]) -> int:
        count = 0
        for key, value in config_dict.items():
            if not hasattr(self._config, key):
                logger.debug("[ConfigManager] Unknown key: %s", key)
                continue
            if isinstance(value, dict) and hasattr(getattr(self._config, key), '__dataclass_fields__'):
                nested = getattr(self._config, key)
                for k, v in value.items():
                    if hasattr(nested, k):
                        setattr(nested, k, v)
                        count += 1
            else:
                setattr(self._config, key, value)
                count += 1
        return count

    def _set_nested_value(self, section: str, key: Optional[str], value: Any):
        if key is None:
            setattr(self._config, section, value)
            return
        section_obj = getattr(self._config, section, None)
        if section_obj is not None and hasattr(section_obj, key):
            setattr(section_obj, key, value)


def get_config() -> LabConfig:
    """获取配置，如果未初始化则自动创建"""
    manager = ConfigManager.get_instance()
    if manager._config is None or manager._config_dir is None:
        create_config()
    return manager.get_config()


def create_config(config_path: str = None) -> LabConfig:
    manager = ConfigManager.get_instance()
    if config_path is None:
        for default_path in ["config.yaml", "config.yml", "config.json"]:
            if Path(default_path).exists():
                config_path = default_path
                break
    if config_path:
        manager.load_from_file(config_path)
    manager.load_from_env()
    # 环境变量加载后也需要重新解析相对路径
    manager._resolve_relative_paths()
    return manager.get_config()


def setup_logging(level: str = None, file_path: str = None) -> logging.Logger:
    """配置包日志：stderr 输出，可选文件输出

    Args:
        level: 日志级别，None 时使用配置中的级别
        file_path: 日志文件路径，None 时使用配置中的路径
    """
    cfg = ConfigManager.get_config().logging
    level = (level or cfg.level or "INFO").upper()
    file_path = file_path or cfg.file_path

    pkg_logger = logging.getLogger("baumkatz_lab")
    pkg_logger.setLevel(level)
    for handler in list(pkg_logger.handlers):
        pkg_logger.removeHandler(handler)

    formatter = logging.Formatter("%(asctime)s %(levelname)s [%(name)s] %(message)s")
    stream = logging.StreamHandler()  # 默认 stderr，不污染 CSV 输出
    stream.setFormatter(formatter)
    pkg_logger.addHandler(stream)
    if file_path:
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(file_path, encoding="utf-8")
        file_handler.setFormatter(formatter)
        pkg_logger.addHandler(file_handler)
    pkg_logger.propagate = False
    return pkg_logger
