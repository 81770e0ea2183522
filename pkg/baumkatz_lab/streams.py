#!/usr/bin/env python3
"""Baum-Katz Lab Random Streams - 可复现的计数器型随机流

每个流由 (seed, 路径) 唯一确定，底层是 Philox 计数器生成器。
split() 得到的子流与父流、兄弟流互相独立，因此第 i 个重复实验的
随机数不依赖调度顺序和线程数。
"""

from typing import Tuple

import numpy as np

from .errors import InvalidParameterError


class RandomStream:
    """随机流句柄"""

    __slots__ = ("_seed", "_path", "_generator")

    def __init__(self, seed: int, path: Tuple[int, ...] = ()):
        if int(seed) < 0:
            raise InvalidParameterError(f"seed must be non-negative, got {seed}")
        if any(int(i) < 0 for i in path):
            raise InvalidParameterError(f"stream indices must be non-negative, got {path}")
        self._seed = int(seed)
        self._path = tuple(int(i) for i in path)
        self._generator = None

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStream":
        return cls(seed)

    def split(self, *indices: int) -> "RandomStream":
        """派生独立子流"""
        return RandomStream(self._seed, self._path + tuple(indices))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def path(self) -> Tuple[int, ...]:
        return self._path

    @property
    def generator(self) -> np.random.Generator:
        # 懒创建；同一句柄上的连续抽样共享状态
        if self._generator is None:
            seq = np.random.SeedSequence(entropy=self._seed, spawn_key=self._path)
            self._generator = np.random.Generator(np.random.Philox(seq))
        return self._generator

    def __repr__(self) -> str:
        return f"RandomStream(seed={self._seed}, path={self._path})"
