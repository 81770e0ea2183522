#!/usr/bin/env python3
"""Baum-Katz Lab Errors - 异常定义"""

from typing import Optional


class LabError(Exception):
    """实验室异常基类"""
    pass


class InvalidParameterError(LabError, ValueError):
    """参数不满足操作前置条件"""
    pass


class SideConditionError(InvalidParameterError):
    """r >= 1 时要求 E θ = 0"""
    pass


class EnumerationBudgetError(LabError):
    """精确枚举的状态空间超出预算"""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(f"enumeration needs {required} outcomes, budget is {budget}")


class ConfigError(LabError):
    """实验配置错误

    location 形如 file:line 或 --flag，用于 CLI 报错定位
    """

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}" if location else message)
