"""pytest 公共配置"""

import sys
from pathlib import Path

import pytest

# 添加项目根目录到路径
ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from baumkatz_lab import presets, result_cache
from baumkatz_lab.config import ConfigManager


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance experiments")


@pytest.fixture(autouse=True)
def fresh_config():
    """每个测试使用默认配置和新的枚举缓存"""
    ConfigManager.reset()
    result_cache._default_cache = None
    presets._presets_loader = None
    yield ConfigManager.get_config()
    ConfigManager.reset()
    result_cache._default_cache = None
    presets._presets_loader = None


@pytest.fixture
def presets_dir() -> Path:
    return ROOT / "presets"
