#!/usr/bin/env python3
"""Baum-Katz Lab Presets - 预置实验加载模块

presets 目录下每个 *.yaml 是一份扁平的实验配置，额外带 description 与可选的 command。
"""

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .errors import ConfigError

logger = logging.getLogger("baumkatz_lab")

META_KEYS = ("name", "description", "command")


def read_flat_yaml(path: Path) -> Tuple[Dict[str, Any], Dict[str, str]]:
    """读取扁平 YAML 映射

    Returns:
        (values, locations)，locations[key] 形如 "file:line"

    Raises:
        ConfigError: 文件不可读、语法错误或不是扁平映射
    """
    path = Path(path)
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e.strerror}", str(path))
    try:
        root = yaml.compose(content)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"invalid YAML: {getattr(e, 'problem', e)}", where)
    if root is None:
        return {}, {}
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("expected a key: value mapping", f"{path}:{root.start_mark.line + 1}")

    values: Dict[str, Any] = {}
    locations: Dict[str, str] = {}
    for key_node, value_node in root.value:
        where = f"{path}:{key_node.start_mark.line + 1}"
        if isinstance(value_node, yaml.MappingNode):
            raise ConfigError(f"nested mapping under {key_node.value!r} is not allowed", where)
        key = str(key_node.value).strip().replace("-", "_")
        # 单个节点单独构造成 Python 值
        values[key] = yaml.safe_load(yaml.serialize(value_node))
        locations[key] = where
    return values, locations


@dataclass
class Preset:
    """预置实验"""
    name: str
    description: str
    path: Path
    command: Optional[str] = None
    values: Dict[str, Any] = field(default_factory=dict)
    locations: Dict[str, str] = field(default_factory=dict)


class PresetLoader:
    """预置实验加载器"""

    def __init__(self, presets_dir: str = "./presets"):
        self.presets_dir = Path(presets_dir)
        self.presets: Dict[str, Preset] = {}
        self._lock = threading.Lock()

    def scan(self) -> List[str]:
        """扫描 presets 目录"""
        if not self.presets_dir.exists():
            return []
        loaded = []
        for path in sorted(self.presets_dir.glob("*.yaml")):
            try:
                preset = self._parse_preset_file(path)
            except ConfigError as e:
                logger.warning("[PresetLoader] Error parsing preset %s: %s", path.name, e)
                continue
            self.presets[preset.name] = preset
            loaded.append(preset.name)
        return loaded

    def _parse_preset_file(self, path: Path) -> Preset:
        values, locations = read_flat_yaml(path)
        meta = {k: values.pop(k, None) for k in META_KEYS}
        for k in META_KEYS:
            locations.pop(k, None)
        if not meta["description"]:
            raise ConfigError("preset needs a description", str(path))
        return Preset(
            name=str(meta["name"] or path.stem),
            description=str(meta["description"]).strip(),
            path=path,
            command=meta["command"],
            values=values,
            locations=locations,
        )

    def load(self, name: str) -> Optional[Preset]:
        """按名称取预置，未扫描时先扫描"""
        if not self.presets:
            self.scan()
        return self.presets.get(name)

    def get_descriptions(self) -> str:
        """预置描述列表"""
        if not self.presets:
            return "(no presets available)"
        return "\n".join(f"- {name}: {p.description}" for name, p in sorted(self.presets.items()))

    def list_presets(self) -> List[str]:
        return sorted(self.presets.keys())

    def get_statistics(self) -> Dict[str, Any]:
        return {
            "total_presets": len(self.presets),
            "with_command": sum(1 for p in self.presets.values() if p.command),
            "presets_dir": str(self.presets_dir),
        }

    def reload(self, name: str = None) -> List[str]:
        """重新加载"""
        with self._lock:
            if name:
                self.presets.pop(name, None)
                return self.scan()
            self.presets.clear()
            return self.scan()


_presets_loader: Optional[PresetLoader] = None


def get_presets_loader(presets_dir: str = None) -> PresetLoader:
    global _presets_loader
    if presets_dir is not None:
        return PresetLoader(presets_dir)
    if _presets_loader is None:
        from .config import get_config
        _presets_loader = PresetLoader(get_config().presets_dir)
    return _presets_loader


def list_presets() -> List[str]:
    loader = get_presets_loader()
    if not loader.presets:
        loader.scan()
    return loader.list_presets()
