#!/usr/bin/env python3
"""Baum-Katz Lab Result Cache - 精确枚举结果缓存

同一个 (模型, 噪声, n) 的结果表在一次不等式扫描里会被多个检验反复使用：
- oracle.enumerate_tail 与各个枚举型不等式检验共享同一张表
- 有界 LRU，按最近使用顺序驱逐
- 多个工作线程并发访问，带锁
"""

import threading
from typing import Any, Callable, Dict, Hashable, List, Optional


class EnumerationCache:
    """枚举结果缓存

    特性：
    - 线程安全
    - get_or_compute 在锁外计算，重复计算的结果相同，后写入者覆盖
    """

    def __init__(self, max_size: int = 64):
        """
        Args:
            max_size: 最大缓存条目数
        """
        self._cache: Dict[Hashable, Any] = {}
        self._order: List[Hashable] = []
        self._max_size = max(1, int(max_size))
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def put(self, key: Hashable, value: Any):
        """存储结果"""
        with self._lock:
            if key in self._cache:
                self._order.remove(key)
            elif len(self._cache) >= self._max_size and self._order:
                # LRU 驱逐
                oldest = self._order.pop(0)
                self._cache.pop(oldest, None)
            self._cache[key] = value
            self._order.append(key)

    def get(self, key: Hashable) -> Optional[Any]:
        """获取结果，命中时刷新顺序"""
        with self._lock:
            if key not in self._cache:
                self.misses += 1
                return None
            self.hits += 1
            self._order.remove(key)
            self._order.append(key)
            return self._cache[key]

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        value = self.get(key)
        if value is None:
            value = compute()
            self.put(key, value)
        return value

    @property
    def max_size(self) -> int:
        return self._max_size

    def __contains__(self, key: Hashable) -> bool:
        with self._lock:
            return key in self._cache

    def clear(self):
        """清空缓存"""
        with self._lock:
            self._cache.clear()
            self._order.clear()
            self.hits = 0
            self.misses = 0

    def __len__(self) -> int:
        return len(self._cache)

    def __repr__(self) -> str:
        return f"EnumerationCache(size={len(self)}, max_size={self._max_size}, hits={self.hits})"


def create_enumeration_cache(max_size: int = 64) -> EnumerationCache:
    """创建新的枚举缓存实例"""
    return EnumerationCache(max_size=max_size)


_default_cache: Optional[EnumerationCache] = None
_default_lock = threading.Lock()


def get_enumeration_cache() -> EnumerationCache:
    """模块级默认缓存，容量取自配置"""
    global _default_cache
    with _default_lock:
        if _default_cache is None:
            from .config import ConfigManager
            _default_cache = create_enumeration_cache(ConfigManager.get_config().enumeration.cache_size)
        return _default_cache
