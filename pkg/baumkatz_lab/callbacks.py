"""事件处理器模块"""

import logging
from typing import List

from .events import Event, EventType

logger = logging.getLogger("baumkatz_lab")

_LEVELS = {
    EventType.BLOCK_DONE.value: logging.DEBUG,
    EventType.TAIL_ESTIMATED.value: logging.DEBUG,
    EventType.WARNING.value: logging.WARNING,
    EventType.ERROR.value: logging.ERROR,
}


class LoggingEventHandler:
    """把实验事件写入包日志"""

    def __init__(self, log: logging.Logger = None):
        self.log = log or logger

    def handle(self, event: Event):
        level = _LEVELS.get(event.type, logging.INFO)
        if not self.log.isEnabledFor(level):
            return
        details = " ".join(f"{k}={v}" for k, v in sorted(event.data.items()))
        prefix = f"[{event.experiment}] " if event.experiment else ""
        self.log.log(level, "%s%s %s %s", prefix, event.source or "-", event.type, details)


class CollectingEventHandler:
    """在内存中收集事件"""

    def __init__(self):
        self.events: List[Event] = []

    def handle(self, event: Event):
        self.events.append(event)

    def of_type(self, event_type: EventType) -> List[Event]:
        return [e for e in self.events if e.type == event_type.value]

    def clear(self):
        self.events.clear()
