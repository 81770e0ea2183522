#!/usr/bin/env python3
"""
Baum-Katz Lab Events - 实验事件通知
"""

import logging
import threading
import time
from enum import Enum
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger("baumkatz_lab")


class EventType(Enum):
    """事件类型枚举"""
    EXPERIMENT_START = "experiment_start"
    EXPERIMENT_STOP = "experiment_stop"
    BLOCK_DONE = "block_done"  # Monte Carlo 单块完成
    TAIL_ESTIMATED = "tail_estimated"
    SERIES_ACCUMULATED = "series_accumulated"
    VERDICT = "verdict"
    INEQUALITY_CHECKED = "inequality_checked"
    WARNING = "warning"
    ERROR = "error"


@dataclass
class Event:
    """事件"""
    type: str
    timestamp: float = field(default_factory=time.time)
    data: Dict[str, Any] = field(default_factory=dict)
    source: str = ""
    experiment: Optional[str] = None


class EventEmitter:
    """事件发射器

    处理器可以是带 handle(event) 方法的对象，也可以是普通函数。
    处理器抛出的异常只记录日志，不会中断实验。
    """

    def __init__(self, experiment: str = None):
        self._handlers: List[Callable] = []
        self._lock = threading.Lock()
        self._experiment = experiment

    def on(self, handler: Callable):
        """注册事件处理器"""
        with self._lock:
            self._handlers.append(handler)

    def off(self, handler: Callable) -> bool:
        """移除事件处理器

        Returns:
            bool: 是否成功移除
        """
        with self._lock:
            if handler in self._handlers:
                self._handlers.remove(handler)
                return True
            return False

    def emit(self, event_type, data: Dict[str, Any] = None, source: str = "") -> Event:
        """发射事件

        Args:
            event_type: EventType 枚举或字符串
            data: 事件数据
            source: 事件来源模块
        """
        type_value = event_type.value if isinstance(event_type, EventType) else str(event_type)
        event = Event(type=type_value, data=data or {}, source=source, experiment=self._experiment)
        with self._lock:
            handlers = list(self._handlers)
        for handler in handlers:
            try:
                handler.handle(event) if hasattr(handler, 'handle') else handler(event)
            except Exception as e:
                logger.warning("[EVENTS] handler %r failed on %s: %s", handler, type_value, e)
        return event

    def __len__(self) -> int:
        return len(self._handlers)


def emit_if(events: Optional[EventEmitter], event_type, data: Dict[str, Any] = None, source: str = ""):
    """events 可能为 None 的便捷发射"""
    if events is not None:
        events.emit(event_type, data, source)
